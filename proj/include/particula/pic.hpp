#ifndef PARTICULA_PIC_HPP
#define PARTICULA_PIC_HPP

#include <particula/aosoa.hpp>
#include <particula/binning.hpp>
#include <particula/error.hpp>
#include <particula/execution.hpp>
#include <particula/geometry.hpp>
#include <particula/grid.hpp>
#include <particula/pfft.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
// Particles and state
//---------------------------------------------------------------------------//

//! x[3], v[3], charge q, mass m, statistical weight w, field at particle e[3].
inline FieldSchema pic_schema()
{
    return { { "x", ScalarKind::Float64, { 3 } }, { "v", ScalarKind::Float64, { 3 } },
             { "q", ScalarKind::Float64, {} },    { "m", ScalarKind::Float64, {} },
             { "w", ScalarKind::Float64, {} },    { "e", ScalarKind::Float64, { 3 } } };
}

/*!
  \brief Electrostatic PIC state on a periodic grid.

  Physical charge and mass of a particle are q*w and m*w. rho is the node
  charge density including the uniform background; phi is the (filtered)
  potential and efield = -grad phi at nodes.
*/
struct PICState
{
    ParticleSet particles;
    StructuredGrid grid;
    NodeField rho;
    NodeField phi;
    NodeField efield;
    double dt = 0.1;
    Vec3 B{ 0.0, 0.0, 0.0 };
    //! Spline order for deposit and gather.
    int order = 1;
    bool filter = false;
    double background = 0.0;
    //! Resort particles by cell every this many steps; 0 disables.
    int sort_stride = 0;
    ExecutionMode mode = ExecutionMode::Serial;
    int step = 0;

    PICState() = default;

    PICState( ParticleSet p, const StructuredGrid& g, double time_step )
        : particles( std::move( p ) )
        , grid( g )
        , rho( g )
        , phi( g )
        , efield( g, 3 )
        , dt( time_step )
    {
        for ( int d = 0; d < 3; ++d )
            if ( !g.periodic()[d] )
                throw std::invalid_argument( "PICState: periodic grid required" );
    }
};

struct PICDiagnostics
{
    int step = 0;
    double kinetic = 0.0;
    double field = 0.0;
    double total = 0.0;
    int iterations = 0;
    double residual = 0.0;
    Vec3 momentum{ 0.0, 0.0, 0.0 };
};

//! Background density making the total charge zero.
inline void neutralize( PICState& s )
{
    auto q = s.particles.slice<double>( "q" );
    auto w = s.particles.slice<double>( "w" );
    double total = 0.0;
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        total += q( i ) * w( i );
    s.background = -total / s.grid.box().volume();
}

inline double kinetic_energy( const ParticleSet& p )
{
    auto v = p.slice<double>( "v" );
    auto m = p.slice<double>( "m" );
    auto w = p.slice<double>( "w" );
    double ke = 0.0;
    for ( std::size_t i = 0; i < p.size(); ++i )
        ke += 0.5 * m( i ) * w( i ) *
              ( v( i, 0 ) * v( i, 0 ) + v( i, 1 ) * v( i, 1 ) + v( i, 2 ) * v( i, 2 ) );
    return ke;
}

inline Vec3 total_momentum( const ParticleSet& p )
{
    auto v = p.slice<double>( "v" );
    auto m = p.slice<double>( "m" );
    auto w = p.slice<double>( "w" );
    Vec3 out{ 0.0, 0.0, 0.0 };
    for ( std::size_t i = 0; i < p.size(); ++i )
        for ( int d = 0; d < 3; ++d )
            out[d] += m( i ) * w( i ) * v( i, d );
    return out;
}

//---------------------------------------------------------------------------//
// Boris pusher
//---------------------------------------------------------------------------//

/*!
  \brief Half electric kick, Boris rotation about uniform B, half electric
  kick, drift. Uses the charge-to-mass ratio q/m of each particle.
*/
inline void boris_push( FieldView<double> x, FieldView<double> v, FieldView<const double> e,
                        FieldView<const double> q, FieldView<const double> m,
                        const Vec3& B, double dt,
                        ExecutionMode mode = ExecutionMode::Serial )
{
    parallel_for( mode, 0, x.size(), [&]( std::size_t i ) {
        const double h = 0.5 * dt * q( i ) / m( i );
        Vec3 vm, t, s, vp;
        for ( int d = 0; d < 3; ++d )
        {
            vm[d] = v( i, d ) + h * e( i, d );
            t[d] = h * B[d];
        }
        const double t2 = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
        for ( int d = 0; d < 3; ++d )
            s[d] = 2.0 * t[d] / ( 1.0 + t2 );
        const Vec3 v1{ vm[0] + ( vm[1] * t[2] - vm[2] * t[1] ),
                       vm[1] + ( vm[2] * t[0] - vm[0] * t[2] ),
                       vm[2] + ( vm[0] * t[1] - vm[1] * t[0] ) };
        vp = { vm[0] + ( v1[1] * s[2] - v1[2] * s[1] ), vm[1] + ( v1[2] * s[0] - v1[0] * s[2] ),
               vm[2] + ( v1[0] * s[1] - v1[1] * s[0] ) };
        for ( int d = 0; d < 3; ++d )
        {
            v( i, d ) = vp[d] + h * e( i, d );
            x( i, d ) += dt * v( i, d );
        }
    } );
}

//! Push with the particle field "e".
inline void boris_push( ParticleSet& p, const Vec3& B, double dt,
                        ExecutionMode mode = ExecutionMode::Serial )
{
    const auto& cp = p;
    boris_push( p.slice<double>( "x" ), p.slice<double>( "v" ), cp.slice<double>( "e" ),
                cp.slice<double>( "q" ), cp.slice<double>( "m" ), B, dt, mode );
}

//---------------------------------------------------------------------------//
// Field solve
//---------------------------------------------------------------------------//

/*!
  \brief In-place (1/4, 1/2, 1/4) smoothing along each selected axis of a
  periodic node field, every component.
*/
inline void binomial_filter( NodeField& f, const std::array<bool, 3>& axes = { true, true, true } )
{
    const auto& g = f.grid();
    for ( int d = 0; d < 3; ++d )
        if ( !g.periodic()[d] )
            throw std::invalid_argument( "binomial_filter: periodic grid required" );
    const Index3 n{ g.nodes( 0 ), g.nodes( 1 ), g.nodes( 2 ) };
    const std::size_t nc = f.components();
    std::vector<double> line;
    for ( int d = 0; d < 3; ++d )
    {
        if ( !axes[d] || n[d] == 1 )
            continue;
        const int a = ( d + 1 ) % 3, b = ( d + 2 ) % 3;
        line.resize( n[d] );
        for ( int ia = 0; ia < n[a]; ++ia )
            for ( int ib = 0; ib < n[b]; ++ib )
                for ( std::size_t c = 0; c < nc; ++c )
                {
                    auto node = [&]( int k ) {
                        Index3 idx;
                        idx[d] = k;
                        idx[a] = ia;
                        idx[b] = ib;
                        return g.node_index( idx[0], idx[1], idx[2] );
                    };
                    for ( int k = 0; k < n[d]; ++k )
                        line[k] = f( node( k ), c );
                    for ( int k = 0; k < n[d]; ++k )
                    {
                        const double lo = line[( k + n[d] - 1 ) % n[d]];
                        const double hi = line[( k + 1 ) % n[d]];
                        f( node( k ), c ) = 0.25 * lo + 0.5 * line[k] + 0.25 * hi;
                    }
                }
    }
}

namespace detail
{

//! rho = sum of q*w*S / cell volume + background, at positions x.
inline void deposit_at( PICState& s, FieldView<const double> x, FieldView<const double> qw )
{
    s.rho.fill( 0.0 );
    p2g( x, qw, s.rho, s.order, InterpOp::Value, s.mode );
    const double inv = 1.0 / s.grid.cell_volume();
    for ( auto& r : s.rho.data() )
        r = r * inv + s.background;
}

inline FieldSchema pic_work_schema()
{
    return { { "qw", ScalarKind::Float64, {} },    { "x1", ScalarKind::Float64, { 3 } },
             { "xm", ScalarKind::Float64, { 3 } }, { "v1", ScalarKind::Float64, { 3 } },
             { "g", ScalarKind::Float64, { 3 } } };
}

inline ParticleSet make_work( const ParticleSet& p )
{
    ParticleSet work( pic_work_schema(), p.vector_length(), p.size() );
    auto qw = work.slice<double>( "qw" );
    auto q = p.slice<double>( "q" );
    auto w = p.slice<double>( "w" );
    for ( std::size_t i = 0; i < p.size(); ++i )
        qw( i ) = q( i ) * w( i );
    return work;
}

inline void wrap_positions( PICState& s )
{
    auto x = s.particles.slice<double>( "x" );
    const auto& box = s.grid.box();
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        for ( int d = 0; d < 3; ++d )
            x( i, d ) = wrap_coordinate( x( i, d ), box.lo[d], box.length( d ) );
}

inline void maybe_resort( PICState& s )
{
    if ( s.sort_stride <= 0 || s.step % s.sort_stride != 0 )
        return;
    auto bins = bin_by_position( std::as_const( s.particles ).slice<double>( "x" ),
                                 s.grid.box(), s.grid.spacing() );
    permute( s.particles, bins.permutation );
}

} // namespace detail

/*!
  \brief Solve for phi and efield from the current rho; returns the field
  energy 1/2 dV sum(rho * phi).

  With filtering on, phi = F G F rho and efield = -F grad G F rho, where F is
  the binomial filter and G the spectral Poisson inverse. With_field = false
  updates phi only.
*/
inline double solve_field( PICState& s, bool with_field = true )
{
    NodeField source = s.rho;
    if ( s.filter )
        binomial_filter( source );
    auto sol = poisson_spectral( source, with_field );
    s.phi = std::move( sol.phi );
    if ( s.filter )
        binomial_filter( s.phi );
    if ( with_field )
    {
        if ( s.filter )
            binomial_filter( sol.force );
        for ( std::size_t k = 0; k < s.efield.data().size(); ++k )
            s.efield.data()[k] = -sol.force.data()[k];
    }
    double w = 0.0;
    for ( std::size_t n = 0; n < s.rho.num_nodes(); ++n )
        w += s.rho( n ) * s.phi( n );
    return 0.5 * s.grid.cell_volume() * w;
}

//! Deposit at the particle positions and solve; returns the field energy.
inline double deposit_and_solve( PICState& s )
{
    auto work = detail::make_work( s.particles );
    detail::deposit_at( s, std::as_const( s.particles ).slice<double>( "x" ),
                        std::as_const( work ).slice<double>( "qw" ) );
    return solve_field( s );
}

//---------------------------------------------------------------------------//
// Explicit step
//---------------------------------------------------------------------------//

/*!
  \brief Deposit, solve, gather, Boris push, wrap and optional resort.

  Velocities are staggered half a step behind positions; the reported
  kinetic energy averages the values before and after the push.
*/
inline PICDiagnostics es_explicit_step( PICState& s )
{
    PICDiagnostics out;
    out.field = deposit_and_solve( s );
    const auto& cp = s.particles;
    g2p( s.efield, cp.slice<double>( "x" ), s.particles.slice<double>( "e" ), s.order,
         InterpOp::Value, s.mode );
    const double before = kinetic_energy( s.particles );
    boris_push( s.particles, s.B, s.dt, s.mode );
    out.kinetic = 0.5 * ( before + kinetic_energy( s.particles ) );
    out.total = out.kinetic + out.field;
    out.momentum = total_momentum( s.particles );
    detail::wrap_positions( s );
    ++s.step;
    detail::maybe_resort( s );
    out.step = s.step;
    return out;
}

//---------------------------------------------------------------------------//
// Energy-conserving implicit step
//---------------------------------------------------------------------------//

/*!
  \brief Time-centered electrostatic step that conserves kinetic plus field
  energy up to the Picard tolerance.

  The field energy W(X) = 1/2 dV rho(X).phi(X) is a function of all particle
  positions. The step solves

    x1 = x0 + dt (v0 + v1) / 2,   m w (v1 - v0) = -dt g,

  with the discrete gradient g = grad W(xm) + c (x1 - x0), xm the midpoint
  and c chosen so that sum g.(x1 - x0) = W(x1) - W(x0). Picard iteration
  starts from the explicit prediction with grad W(x0), runs with c = 0 until
  positions change by less than sqrt(picard_tol), and stops when no
  position changes by more than picard_tol under the full map. The magnetic
  field is ignored.
*/
inline PICDiagnostics cn_implicit_step( PICState& s, double picard_tol, int max_iters )
{
    if ( !( picard_tol > 0.0 ) || max_iters < 1 )
        throw std::invalid_argument( "cn_implicit_step: bad tolerance or iteration cap" );
    const std::size_t n = s.particles.size();
    const auto& cp = s.particles;
    auto x0 = cp.slice<double>( "x" );
    auto v0 = cp.slice<double>( "v" );
    auto m = cp.slice<double>( "m" );
    auto w = cp.slice<double>( "w" );

    auto work = detail::make_work( s.particles );
    const auto& cw = work;
    auto qw = cw.slice<double>( "qw" );
    auto x1 = work.slice<double>( "x1" );
    auto xm = work.slice<double>( "xm" );
    auto v1 = work.slice<double>( "v1" );
    auto g = work.slice<double>( "g" );
    const double dt = s.dt;

    detail::deposit_at( s, x0, qw );
    const double w0 = solve_field( s, false );
    g2p( s.phi, x0, g, s.order, InterpOp::Gradient, s.mode );
    for ( std::size_t i = 0; i < n; ++i )
    {
        const double h = 0.5 * dt * dt * qw( i ) / ( m( i ) * w( i ) );
        for ( int d = 0; d < 3; ++d )
            x1( i, d ) = x0( i, d ) + dt * v0( i, d ) - h * g( i, d );
    }

    PICDiagnostics out;
    bool converged = false;
    bool corrected = false;
    double residual = 0.0;
    for ( int it = 1; it <= max_iters; ++it )
    {
        for ( std::size_t i = 0; i < n; ++i )
            for ( int d = 0; d < 3; ++d )
                xm( i, d ) = 0.5 * ( x0( i, d ) + x1( i, d ) );
        detail::deposit_at( s, cw.slice<double>( "xm" ), qw );
        solve_field( s, false );
        g2p( s.phi, cw.slice<double>( "xm" ), g, s.order, InterpOp::Gradient, s.mode );

        double work_mid = 0.0, norm2 = 0.0;
        for ( std::size_t i = 0; i < n; ++i )
            for ( int d = 0; d < 3; ++d )
            {
                g( i, d ) *= qw( i );
                const double dx = x1( i, d ) - x0( i, d );
                work_mid += g( i, d ) * dx;
                norm2 += dx * dx;
            }
        // Picard update x1 <- x0 + dt (v0 + v1) / 2 with correction c.
        auto update = [&]( double c, bool write ) {
            double r = 0.0;
            for ( std::size_t i = 0; i < n; ++i )
            {
                const double inv_mass = 1.0 / ( m( i ) * w( i ) );
                for ( int d = 0; d < 3; ++d )
                {
                    const double gbar = g( i, d ) + c * ( x1( i, d ) - x0( i, d ) );
                    const double vn = v0( i, d ) - dt * gbar * inv_mass;
                    const double next = x0( i, d ) + 0.5 * dt * ( v0( i, d ) + vn );
                    r = std::max( r, std::abs( next - x1( i, d ) ) );
                    if ( write )
                    {
                        v1( i, d ) = vn;
                        x1( i, d ) = next;
                    }
                }
            }
            return r;
        };

        // The end-point energy only enters c; it is evaluated once the
        // uncorrected iteration is within sqrt(picard_tol).
        if ( !corrected && update( 0.0, false ) < std::sqrt( picard_tol ) )
            corrected = true;
        double c = 0.0;
        if ( corrected )
        {
            detail::deposit_at( s, cw.slice<double>( "x1" ), qw );
            const double w1 = solve_field( s, false );
            c = norm2 > 0.0 ? ( w1 - w0 - work_mid ) / norm2 : 0.0;
        }
        residual = update( c, true );
        out.iterations = it;
        if ( corrected && residual < picard_tol )
        {
            converged = true;
            break;
        }
    }
    out.residual = residual;
    if ( !converged )
        throw ConvergenceError( "cn_implicit_step: Picard iteration did not converge",
                                out.iterations, residual );

    auto x = s.particles.slice<double>( "x" );
    auto v = s.particles.slice<double>( "v" );
    for ( std::size_t i = 0; i < n; ++i )
        for ( int d = 0; d < 3; ++d )
        {
            x( i, d ) = x1( i, d );
            v( i, d ) = v1( i, d );
        }
    detail::wrap_positions( s );
    out.field = deposit_and_solve( s );
    out.kinetic = kinetic_energy( s.particles );
    out.total = out.kinetic + out.field;
    out.momentum = total_momentum( s.particles );
    ++s.step;
    detail::maybe_resort( s );
    out.step = s.step;
    return out;
}

//! Energies of the current state without advancing it.
inline PICDiagnostics pic_energies( PICState& s )
{
    PICDiagnostics out;
    out.step = s.step;
    out.field = deposit_and_solve( s );
    out.kinetic = kinetic_energy( s.particles );
    out.total = out.kinetic + out.field;
    out.momentum = total_momentum( s.particles );
    return out;
}

/*!
  \brief Largest dt at which no particle crosses more than one cell per step
  along any resolved axis.
*/
inline double explicit_time_step_limit( const PICState& s )
{
    auto v = s.particles.slice<double>( "v" );
    double rate = 0.0;
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        for ( int d = 0; d < 3; ++d )
            if ( s.grid.nodes( d ) > 1 )
                rate = std::max( rate, std::abs( v( i, d ) ) / s.grid.spacing( d ) );
    return rate > 0.0 ? 1.0 / rate : std::numeric_limits<double>::infinity();
}

//---------------------------------------------------------------------------//
// Plasma setups
//---------------------------------------------------------------------------//

/*!
  \brief Uniform electron plasma on a neutralizing background, optionally as
  two counter-streaming beams along x.

  Electrons have q/m = -1 and weights chosen so the plasma frequency is
  omega_p. Positions are uniform random; every particle is displaced by
  amplitude * sin(k x) along x with k = 2 pi mode / L_x.
*/
struct PlasmaConfig
{
    Index3 cells{ 64, 64, 1 };
    Vec3 lengths{ 6.4, 6.4, 1.0 };
    std::size_t particles = 100000;
    double omega_p = 1.0;
    double beam_speed = 0.0;
    double amplitude = 0.0;
    int mode = 1;
    double dt = 0.1;
    int order = 1;
    bool filter = false;
    int sort_stride = 0;
    std::size_t vector_length = 16;
    ExecutionMode exec = ExecutionMode::Serial;
    std::uint64_t seed = 1;
};

inline PICState make_plasma( const PlasmaConfig& c )
{
    if ( c.particles == 0 )
        throw ConfigError( "pic: particle count must be positive" );
    if ( !( c.dt > 0.0 ) || !( c.omega_p > 0.0 ) )
        throw ConfigError( "pic: dt and omega_p must be positive" );
    if ( c.order < 1 || c.order > 3 )
        throw ConfigError( "pic: spline order must be 1, 2 or 3" );
    for ( int d = 0; d < 3; ++d )
        if ( c.cells[d] < 1 || !is_power_of_two( c.cells[d] ) || !( c.lengths[d] > 0.0 ) )
            throw ConfigError( "pic: grid cells must be powers of two and lengths positive" );
    const Box box{ { 0.0, 0.0, 0.0 }, c.lengths };
    const StructuredGrid grid( box, c.cells, { true, true, true } );

    ParticleSet p( pic_schema(), c.vector_length, c.particles );
    auto x = p.slice<double>( "x" );
    auto v = p.slice<double>( "v" );
    auto q = p.slice<double>( "q" );
    auto m = p.slice<double>( "m" );
    auto w = p.slice<double>( "w" );
    const double mass = c.omega_p * c.omega_p * box.volume() / c.particles;
    const double k = 2.0 * std::numbers::pi * c.mode / c.lengths[0];
    std::mt19937_64 rng( c.seed );
    std::uniform_real_distribution<double> u( 0.0, 1.0 );
    for ( std::size_t i = 0; i < c.particles; ++i )
    {
        for ( int d = 0; d < 3; ++d )
            x( i, d ) = c.cells[d] > 1 ? u( rng ) * c.lengths[d] : 0.5 * c.lengths[d];
        x( i, 0 ) = wrap_coordinate( x( i, 0 ) + c.amplitude * std::sin( k * x( i, 0 ) ), 0.0,
                                     c.lengths[0] );
        v( i, 0 ) = ( i % 2 ? -1.0 : 1.0 ) * c.beam_speed;
        q( i ) = -mass;
        m( i ) = mass;
        w( i ) = 1.0;
    }
    PICState s( std::move( p ), grid, c.dt );
    s.order = c.order;
    s.filter = c.filter;
    s.sort_stride = c.sort_stride;
    s.mode = c.exec;
    neutralize( s );
    return s;
}

//---------------------------------------------------------------------------//
// Sparse-grid combination deposition
//---------------------------------------------------------------------------//

struct SGCTComponent
{
    int lx = 0;
    int ly = 0;
    double coefficient = 0.0;
};

/*!
  \brief Two-dimensional combination technique of level n on a periodic box.

  Component grids have 2^lx x 2^ly cells with lx, ly >= base. Grids with
  lx + ly = n + 1 enter with +1 and grids with lx + ly = n with -1; the
  target is the dense 2^n x 2^n grid.
*/
struct SGCTConfig
{
    int level = 5;
    int base = 1;
    Vec3 lengths{ 1.0, 1.0, 1.0 };

    void check() const
    {
        if ( base < 1 )
            throw std::invalid_argument( "SGCTConfig: base level must be >= 1" );
        if ( level + 1 < 2 * base || level < base )
            throw std::invalid_argument( "SGCTConfig: level below base level" );
        if ( level > 20 )
            throw std::invalid_argument( "SGCTConfig: level too large" );
    }

    std::vector<SGCTComponent> components() const
    {
        check();
        std::vector<SGCTComponent> out;
        for ( int lx = base; lx <= level + 1 - base; ++lx )
            out.push_back( { lx, level + 1 - lx, 1.0 } );
        for ( int lx = base; lx <= level - base; ++lx )
            out.push_back( { lx, level - lx, -1.0 } );
        return out;
    }

    Box box() const { return { { 0.0, 0.0, 0.0 }, lengths }; }

    StructuredGrid grid( int lx, int ly ) const
    {
        return StructuredGrid( box(), { 1 << lx, 1 << ly, 1 }, { true, true, true } );
    }

    StructuredGrid dense_grid() const { return grid( level, level ); }
};

struct SGCTResult
{
    std::vector<SGCTComponent> components;
    //! Charge density on each component grid.
    std::vector<NodeField> component_density;
    //! Combined density on the dense grid.
    NodeField combined;
};

//! Linear (CIC) charge density of the particles on a periodic grid.
inline NodeField cic_density( FieldView<const double> x, FieldView<const double> charge,
                              const StructuredGrid& grid,
                              ExecutionMode mode = ExecutionMode::Serial )
{
    NodeField f( grid );
    p2g( x, charge, f, 1, InterpOp::Value, mode );
    const double inv = 1.0 / grid.cell_volume();
    for ( auto& v : f.data() )
        v *= inv;
    return f;
}

//! Bilinear interpolation of a periodic node field onto another grid's nodes.
inline NodeField interpolate_nodes( const NodeField& from, const StructuredGrid& to )
{
    ParticleSet nodes( { { "x", ScalarKind::Float64, { 3 } }, { "f", ScalarKind::Float64, {} } },
                       64, to.num_nodes() );
    auto x = nodes.slice<double>( "x" );
    for ( std::size_t n = 0; n < to.num_nodes(); ++n )
    {
        const auto c = to.node_coordinate( n );
        const auto p = to.node_position( c[0], c[1], c[2] );
        for ( int d = 0; d < 3; ++d )
            x( n, d ) = p[d];
    }
    g2p( from, std::as_const( nodes ).slice<double>( "x" ), nodes.slice<double>( "f" ), 1 );
    NodeField out( to );
    auto f = nodes.slice<double>( "f" );
    for ( std::size_t n = 0; n < to.num_nodes(); ++n )
        out( n ) = f( n );
    return out;
}

/*!
  \brief CIC-deposit onto every component grid, interpolate each onto the
  dense grid and combine with the +-1 coefficients.
*/
inline SGCTResult sgct_deposit( FieldView<const double> x, FieldView<const double> charge,
                                const SGCTConfig& cfg,
                                ExecutionMode mode = ExecutionMode::Serial )
{
    SGCTResult out;
    out.components = cfg.components();
    const auto dense = cfg.dense_grid();
    out.combined = NodeField( dense );
    for ( const auto& c : out.components )
    {
        out.component_density.push_back( cic_density( x, charge, cfg.grid( c.lx, c.ly ), mode ) );
        const auto fine = interpolate_nodes( out.component_density.back(), dense );
        for ( std::size_t n = 0; n < dense.num_nodes(); ++n )
            out.combined( n ) += c.coefficient * fine( n );
    }
    return out;
}

//! One row of the sampling-noise experiment.
struct SGCTVarianceRow
{
    int level = 0;
    std::size_t particles = 0;
    double variance_dense = 0.0;
    double variance_sgct = 0.0;
};

//! Mean of (f / mean - 1)^2 over the nodes.
inline double relative_variance( const NodeField& f )
{
    const double mean = f.sum() / f.num_nodes();
    double acc = 0.0;
    for ( std::size_t n = 0; n < f.num_nodes(); ++n )
    {
        const double r = f( n ) / mean - 1.0;
        acc += r * r;
    }
    return acc / f.num_nodes();
}

/*!
  \brief Uniform random particles of unit total charge on the unit square;
  relative node variance of the direct dense CIC density and of the
  combined density.
*/
inline SGCTVarianceRow sgct_variance( int level, std::size_t particles, std::uint64_t seed,
                                      ExecutionMode mode = ExecutionMode::Serial )
{
    SGCTConfig cfg;
    cfg.level = level;
    ParticleSet p( { { "x", ScalarKind::Float64, { 3 } }, { "q", ScalarKind::Float64, {} } },
                   64, particles );
    auto x = p.slice<double>( "x" );
    auto q = p.slice<double>( "q" );
    std::mt19937_64 rng( seed );
    std::uniform_real_distribution<double> u( 0.0, 1.0 );
    for ( std::size_t i = 0; i < particles; ++i )
    {
        x( i, 0 ) = u( rng );
        x( i, 1 ) = u( rng );
        x( i, 2 ) = 0.5;
        q( i ) = 1.0 / particles;
    }
    const auto& cp = p;
    SGCTVarianceRow row;
    row.level = level;
    row.particles = particles;
    row.variance_dense = relative_variance(
        cic_density( cp.slice<double>( "x" ), cp.slice<double>( "q" ), cfg.dense_grid(), mode ) );
    row.variance_sgct = relative_variance(
        sgct_deposit( cp.slice<double>( "x" ), cp.slice<double>( "q" ), cfg, mode ).combined );
    return row;
}

} // namespace particula

#endif // PARTICULA_PIC_HPP
