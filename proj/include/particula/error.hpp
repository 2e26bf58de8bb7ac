#ifndef PARTICULA_ERROR_HPP
#define PARTICULA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace particula
{

//---------------------------------------------------------------------------//
// Error categories. The command-line driver maps each category onto an exit
// code, so library code throws the most specific type that applies.
//---------------------------------------------------------------------------//

//! Invalid run configuration or argument (exit code 2).
class ConfigError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

//! A physical or structural invariant was broken during a run (exit code 3).
class InvariantViolation : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! An iterative solver failed to reach its tolerance (exit code 4).
class ConvergenceError : public std::runtime_error
{
  public:
    ConvergenceError( const std::string& what, int iterations,
                      double residual )
        : std::runtime_error( what )
        , _iterations( iterations )
        , _residual( residual )
    {
    }

    int iterations() const noexcept { return _iterations; }
    double residual() const noexcept { return _residual; }

  private:
    int _iterations;
    double _residual;
};

} // namespace particula

#endif // PARTICULA_ERROR_HPP
