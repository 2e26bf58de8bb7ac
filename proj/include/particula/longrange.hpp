#ifndef PARTICULA_LONGRANGE_HPP
#define PARTICULA_LONGRANGE_HPP

#include <particula/grid.hpp>
#include <particula/neighbors.hpp>
#include <particula/pfft.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
/*!
  \brief Ewald splitting parameters. Coulomb constant is 1.

  k_max bounds the oracle's reciprocal sum to integer vectors |m| <= k_max.
  mesh and order configure SPME.
*/
struct EwaldParams
{
    double alpha = 0.0;
    double r_cut = 0.0;
    int k_max = 0;
    Index3 mesh{ 32, 32, 32 };
    int order = 3;
    //! Add the uniform neutralizing background term for charged systems.
    bool neutralizing_background = false;
    //! Subtract the mean net force from SPME reciprocal forces.
    bool remove_net_force = true;
};

struct CoulombResult
{
    double energy = 0.0;
    double real = 0.0;
    double reciprocal = 0.0;
    double self = 0.0;
    double background = 0.0;
    std::vector<Vec3> forces;
};

//! Smallest alpha with erfc(alpha * r_cut) <= tol.
inline double default_alpha( double r_cut, double tol = 1e-8 )
{
    if ( !( r_cut > 0.0 ) )
        throw std::invalid_argument( "default_alpha: cutoff must be positive" );
    double lo = 0.0, hi = 10.0;
    for ( int it = 0; it < 200; ++it )
    {
        const double mid = 0.5 * ( lo + hi );
        ( std::erfc( mid ) > tol ? lo : hi ) = mid;
    }
    return hi / r_cut;
}

namespace detail
{

inline void check_cubic_box( const Box& box, const char* who )
{
    const double L = box.length( 0 );
    if ( box.empty() || box.length( 1 ) != L || box.length( 2 ) != L )
        throw std::invalid_argument( std::string( who ) + ": cubic box required" );
}

//! Charge sum check and background term -pi Q^2 / (2 V alpha^2).
inline double background_energy( FieldView<const double> q, const Box& box,
                                  const EwaldParams& p, const char* who )
{
    double total = 0.0, abs_total = 0.0;
    for ( std::size_t i = 0; i < q.size(); ++i )
    {
        total += q( i );
        abs_total += std::abs( q( i ) );
    }
    if ( std::abs( total ) <= 1e-12 * std::max( abs_total, 1.0 ) )
        return 0.0;
    if ( !p.neutralizing_background )
        throw std::invalid_argument( std::string( who ) +
                                     ": non-neutral system without background correction" );
    return -std::numbers::pi * total * total /
           ( 2.0 * box.volume() * p.alpha * p.alpha );
}

inline double self_energy( FieldView<const double> q, double alpha )
{
    double s = 0.0;
    for ( std::size_t i = 0; i < q.size(); ++i )
        s += q( i ) * q( i );
    return -alpha / std::sqrt( std::numbers::pi ) * s;
}

//! erfc(a r)/r and its radial force factor -dU/dr / r.
inline void erfc_pair( double alpha, double r2, double& u, double& fr )
{
    const double r = std::sqrt( r2 );
    const double e = std::erfc( alpha * r );
    u = e / r;
    fr = ( e / r + 2.0 * alpha / std::sqrt( std::numbers::pi ) *
                       std::exp( -alpha * alpha * r2 ) ) /
         r2;
}

} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Direct Ewald sum over a periodic cubic box.

  Real space sums all images with |r + nL| < r_cut (r_cut may exceed L/2).
  Reciprocal space sums integer vectors 0 < |m| <= k_max.
*/
inline CoulombResult ewald_direct( FieldView<const double> x, FieldView<const double> q,
                                   const Box& box, const EwaldParams& p )
{
    detail::check_cubic_box( box, "ewald_direct" );
    if ( !( p.alpha > 0.0 ) || !( p.r_cut > 0.0 ) || p.k_max < 1 )
        throw std::invalid_argument( "ewald_direct: alpha, r_cut, k_max must be positive" );
    const std::size_t n = x.size();
    const double L = box.length( 0 );
    const double V = box.volume();
    CoulombResult out;
    out.forces.assign( n, Vec3{ 0.0, 0.0, 0.0 } );
    out.background = detail::background_energy( q, box, p, "ewald_direct" );
    out.self = detail::self_energy( q, p.alpha );

    const int images = static_cast<int>( std::ceil( p.r_cut / L ) );
    const double rc2 = p.r_cut * p.r_cut;
    for ( std::size_t i = 0; i < n; ++i )
        for ( std::size_t j = 0; j < n; ++j )
            for ( int a = -images; a <= images; ++a )
                for ( int b = -images; b <= images; ++b )
                    for ( int c = -images; c <= images; ++c )
                    {
                        if ( i == j && a == 0 && b == 0 && c == 0 )
                            continue;
                        const Vec3 d{ x( i, 0 ) - x( j, 0 ) - a * L,
                                      x( i, 1 ) - x( j, 1 ) - b * L,
                                      x( i, 2 ) - x( j, 2 ) - c * L };
                        const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                        if ( r2 >= rc2 )
                            continue;
                        double u, fr;
                        detail::erfc_pair( p.alpha, r2, u, fr );
                        const double qq = q( i ) * q( j );
                        out.real += 0.5 * qq * u;
                        for ( int k = 0; k < 3; ++k )
                            out.forces[i][k] += qq * fr * d[k];
                    }

    const double two_pi_L = 2.0 * std::numbers::pi / L;
    const int km = p.k_max;
    std::vector<double> phase( n );
    for ( int a = -km; a <= km; ++a )
        for ( int b = -km; b <= km; ++b )
            for ( int c = -km; c <= km; ++c )
            {
                const int m2 = a * a + b * b + c * c;
                if ( m2 == 0 || m2 > km * km )
                    continue;
                const Vec3 k{ two_pi_L * a, two_pi_L * b, two_pi_L * c };
                const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                const double g = std::exp( -k2 / ( 4.0 * p.alpha * p.alpha ) ) / k2;
                double sr = 0.0, si = 0.0;
                for ( std::size_t i = 0; i < n; ++i )
                {
                    phase[i] = k[0] * x( i, 0 ) + k[1] * x( i, 1 ) + k[2] * x( i, 2 );
                    sr += q( i ) * std::cos( phase[i] );
                    si += q( i ) * std::sin( phase[i] );
                }
                out.reciprocal += 2.0 * std::numbers::pi / V * g * ( sr * sr + si * si );
                for ( std::size_t i = 0; i < n; ++i )
                {
                    const double s = 4.0 * std::numbers::pi * q( i ) / V * g *
                                     ( sr * std::sin( phase[i] ) - si * std::cos( phase[i] ) );
                    for ( int d = 0; d < 3; ++d )
                        out.forces[i][d] += s * k[d];
                }
            }
    out.energy = out.real + out.reciprocal + out.self + out.background;
    return out;
}

namespace detail
{

//! Sum over the stencil of w(l) cos(theta l) for the centered B-spline.
inline double spline_symbol( int order, double theta )
{
    switch ( order )
    {
    case 1:
        return 1.0;
    case 2:
        return 0.75 + 0.25 * std::cos( theta );
    case 3:
        return 2.0 / 3.0 + std::cos( theta ) / 3.0;
    }
    throw std::invalid_argument( "spme: unsupported spline order" );
}

} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Smooth particle mesh Ewald.

  Real space runs over a Full neighbor list built with cutoff r_cut.
  Reciprocal space spreads charges with B-splines, applies
  (4 pi / V) exp(-k^2/4a^2)/k^2 divided by the squared spline symbol, and
  gathers -q grad(Psi).
*/
inline CoulombResult spme( FieldView<const double> x, FieldView<const double> q,
                           const Box& box, const EwaldParams& p, const VerletList& list )
{
    detail::check_cubic_box( box, "spme" );
    if ( !( p.alpha > 0.0 ) || !( p.r_cut > 0.0 ) )
        throw std::invalid_argument( "spme: alpha and r_cut must be positive" );
    if ( list.convention() != PairConvention::Full || list.num_rows() != x.size() )
        throw std::invalid_argument( "spme: Full neighbor list over all particles required" );
    const std::size_t n = x.size();
    const double L = box.length( 0 );
    const double V = box.volume();
    CoulombResult out;
    out.forces.assign( n, Vec3{ 0.0, 0.0, 0.0 } );
    out.background = detail::background_energy( q, box, p, "spme" );
    out.self = detail::self_energy( q, p.alpha );

    const double rc2 = p.r_cut * p.r_cut;
    for_each_neighbor( list, [&]( std::size_t i, std::size_t j ) {
        Vec3 d;
        for ( int k = 0; k < 3; ++k )
            d[k] = x( i, k ) - nearest_image( x( i, k ), x( j, k ), L );
        const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if ( r2 >= rc2 )
            return;
        double u, fr;
        detail::erfc_pair( p.alpha, r2, u, fr );
        const double qq = q( i ) * q( j );
        out.real += 0.5 * qq * u;
        for ( int k = 0; k < 3; ++k )
            out.forces[i][k] += qq * fr * d[k];
    } );

    // Reciprocal part.
    StructuredGrid grid( box, p.mesh, { true, true, true } );
    NodeField charge( grid );
    p2g( x, q, charge, p.order );
    ComplexGrid3 Q( p.mesh );
    for ( std::size_t m = 0; m < Q.size(); ++m )
        Q.values[m] = charge( m );
    auto Qk = fft3_serial( Q, FftDirection::Forward );
    const auto K = p.mesh;
    for ( int a = 0; a < K[0]; ++a )
        for ( int b = 0; b < K[1]; ++b )
            for ( int c = 0; c < K[2]; ++c )
            {
                const Index3 m{ detail::signed_mode( a, K[0] ), detail::signed_mode( b, K[1] ),
                                detail::signed_mode( c, K[2] ) };
                double k2 = 0.0, sym = 1.0;
                for ( int d = 0; d < 3; ++d )
                {
                    const double kd = 2.0 * std::numbers::pi * m[d] / L;
                    k2 += kd * kd;
                    sym *= detail::spline_symbol( p.order,
                                                  2.0 * std::numbers::pi * m[d] / K[d] );
                }
                double coef = 0.0;
                if ( k2 > 0.0 )
                    coef = 4.0 * std::numbers::pi / V *
                           std::exp( -k2 / ( 4.0 * p.alpha * p.alpha ) ) / k2 / ( sym * sym );
                Qk( a, b, c ) *= coef;
            }
    // Unnormalized backward transform.
    auto psi_c = fft3_serial( Qk, FftDirection::Backward );
    NodeField psi( grid );
    const double N = static_cast<double>( Q.size() );
    for ( std::size_t m = 0; m < Q.size(); ++m )
    {
        psi( m ) = psi_c.values[m].real() * N;
        out.reciprocal += 0.5 * charge( m ) * psi( m );
    }

    ParticleSet grad( { { "g", ScalarKind::Float64, { 3 } } }, 16, n );
    g2p( psi, x, grad.slice<double>( "g" ), p.order, InterpOp::Gradient );
    auto g = grad.slice<double>( "g" );
    Vec3 net{ 0.0, 0.0, 0.0 };
    std::vector<Vec3> rec( n );
    for ( std::size_t i = 0; i < n; ++i )
        for ( int d = 0; d < 3; ++d )
        {
            rec[i][d] = -q( i ) * g( i, d );
            net[d] += rec[i][d];
        }
    for ( std::size_t i = 0; i < n; ++i )
        for ( int d = 0; d < 3; ++d )
            out.forces[i][d] += rec[i][d] - ( p.remove_net_force ? net[d] / n : 0.0 );

    out.energy = out.real + out.reciprocal + out.self + out.background;
    return out;
}

//! SPME with a neighbor list built internally.
inline CoulombResult spme( FieldView<const double> x, FieldView<const double> q,
                           const Box& box, const EwaldParams& p )
{
    auto list = build_verlet( x, box, { true, true, true }, p.r_cut );
    return spme( x, q, box, p, list );
}

/*!
  \brief Central-difference check of SPME forces against the energy.

  Perturbs each listed particle along every axis by step = 1e-5 * L and
  returns the largest |F_fd - F| over the RMS particle force magnitude.
  Positions are restored afterwards.
*/
inline double spme_force_consistency( FieldView<double> x, FieldView<const double> q,
                                      const Box& box, const EwaldParams& p,
                                      const std::vector<std::size_t>& particles )
{
    const auto ref = spme( x, q, box, p );
    double rms = 0.0;
    for ( const auto& f : ref.forces )
        rms += f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
    rms = std::sqrt( rms / std::max<std::size_t>( ref.forces.size(), 1 ) );
    const double h = 1e-5 * box.length( 0 );
    double worst = 0.0;
    for ( auto i : particles )
        for ( int d = 0; d < 3; ++d )
        {
            const double x0 = x( i, d );
            x( i, d ) = x0 + h;
            const double ep = spme( x, q, box, p ).energy;
            x( i, d ) = x0 - h;
            const double em = spme( x, q, box, p ).energy;
            x( i, d ) = x0;
            const double fd = -( ep - em ) / ( 2.0 * h );
            worst = std::max( worst, std::abs( fd - ref.forces[i][d] ) / rms );
        }
    return worst;
}

} // namespace particula

#endif // PARTICULA_LONGRANGE_HPP
