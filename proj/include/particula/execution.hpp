#ifndef PARTICULA_EXECUTION_HPP
#define PARTICULA_EXECUTION_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
/*!
  \brief Execution policy for data-parallel kernels.

  Serial runs every kernel on the calling thread in ascending index order and
  is the reference for bitwise reproducibility. Parallel splits index ranges
  into contiguous chunks, one per worker.
*/
enum class ExecutionMode
{
    Serial,
    Parallel
};

//! Worker count for parallel mode. PARTICULA_THREADS caps the hardware count.
inline std::size_t worker_count()
{
    std::size_t n = std::max( 1u, std::thread::hardware_concurrency() );
    if ( const char* env = std::getenv( "PARTICULA_THREADS" ) )
    {
        try
        {
            long cap = std::stol( env );
            if ( cap >= 1 )
                n = std::min( n, static_cast<std::size_t>( cap ) );
        }
        catch ( ... )
        {
        }
    }
    return n;
}

//! Contiguous chunk [begin, end) of worker w among n workers over [lo, hi).
inline std::pair<std::size_t, std::size_t>
chunk_range( std::size_t lo, std::size_t hi, std::size_t w, std::size_t n )
{
    const std::size_t len = hi - lo;
    return { lo + len * w / n, lo + len * ( w + 1 ) / n };
}

//---------------------------------------------------------------------------//
// Run body(i) for every i in [begin, end). The body must only write state
// owned by index i.
template <class Body>
void parallel_for( ExecutionMode mode, std::size_t begin, std::size_t end,
                   Body&& body )
{
    if ( end <= begin )
        return;
    const std::size_t workers =
        mode == ExecutionMode::Serial
            ? 1
            : std::min( worker_count(), end - begin );
    if ( workers <= 1 )
    {
        for ( std::size_t i = begin; i < end; ++i )
            body( i );
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve( workers - 1 );
    for ( std::size_t w = 1; w < workers; ++w )
    {
        auto [lo, hi] = chunk_range( begin, end, w, workers );
        pool.emplace_back( [lo = lo, hi = hi, &body] {
            for ( std::size_t i = lo; i < hi; ++i )
                body( i );
        } );
    }
    auto [lo, hi] = chunk_range( begin, end, 0, workers );
    for ( std::size_t i = lo; i < hi; ++i )
        body( i );
}

} // namespace particula

#endif // PARTICULA_EXECUTION_HPP
