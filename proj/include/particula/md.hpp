#ifndef PARTICULA_MD_HPP
#define PARTICULA_MD_HPP

#include <particula/aosoa.hpp>
#include <particula/binning.hpp>
#include <particula/decomp.hpp>
#include <particula/error.hpp>
#include <particula/execution.hpp>
#include <particula/geometry.hpp>
#include <particula/neighbors.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
// Lennard-Jones kernel
//---------------------------------------------------------------------------//

struct LJParams
{
    double epsilon = 1.0;
    double sigma = 1.0;
    double r_cut = 2.5;
    //! Subtract U(r_cut) from every pair energy inside the cutoff. Forces are
    //! unchanged.
    bool shift_energy = false;
};

//! Pair energy 4e[(s/r)^12 - (s/r)^6] without truncation.
inline double lj_energy( double r, const LJParams& lj )
{
    const double sr2 = lj.sigma * lj.sigma / ( r * r );
    const double sr6 = sr2 * sr2 * sr2;
    return 4.0 * lj.epsilon * ( sr6 * sr6 - sr6 );
}

//! -dU/dr / r, so the force on i is this times (x_i - x_j).
inline double lj_force_over_r( double r2, const LJParams& lj )
{
    const double sr2 = lj.sigma * lj.sigma / r2;
    const double sr6 = sr2 * sr2 * sr2;
    return 24.0 * lj.epsilon * ( 2.0 * sr6 * sr6 - sr6 ) / r2;
}

/*!
  \brief Truncated Lennard-Jones forces over a Full list.

  Overwrites f for every row particle. Each row particle takes half of every
  pair energy, so the sum over rows counts each pair once. Minimum image is
  applied along periodic axes. Per-row energies are written to \p energies
  when it is non-empty. Returns the row energies summed in row order.
*/
inline double lj_forces( FieldView<const double> x, FieldView<double> f,
                         const VerletList& list, const Box& box,
                         const Periodic& periodic, const LJParams& lj,
                         ExecutionMode mode = ExecutionMode::Serial,
                         std::span<double> energies = {} )
{
    if ( list.convention() != PairConvention::Full )
        throw std::invalid_argument( "lj_forces: Full neighbor list required" );
    if ( list.cutoff() < lj.r_cut )
        throw std::invalid_argument( "lj_forces: list cutoff below r_cut" );
    const std::size_t rows = list.num_rows();
    if ( !energies.empty() && energies.size() < rows )
        throw std::invalid_argument( "lj_forces: energy buffer too small" );

    std::vector<double> e_local;
    if ( energies.empty() )
    {
        e_local.assign( rows, 0.0 );
        energies = e_local;
    }
    const Vec3 L = box.lengths();
    const double rc2 = lj.r_cut * lj.r_cut;
    const double overlap2 = 1e-20 * lj.sigma * lj.sigma;
    const double shift = lj.shift_energy ? lj_energy( lj.r_cut, lj ) : 0.0;

    // Flag rather than throw from worker threads.
    std::vector<unsigned char> overlap( rows, 0 );
    parallel_for( mode, 0, rows, [&]( std::size_t i ) {
        Vec3 fi{ 0.0, 0.0, 0.0 };
        double ei = 0.0;
        for ( auto j : list.row( i ) )
        {
            Vec3 d;
            for ( int k = 0; k < 3; ++k )
                d[k] = periodic[k] ? x( i, k ) - nearest_image( x( i, k ), x( j, k ), L[k] )
                                   : x( i, k ) - x( j, k );
            const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if ( r2 < overlap2 )
            {
                overlap[i] = 1;
                continue;
            }
            if ( !( r2 < rc2 ) )
                continue;
            const double s = lj_force_over_r( r2, lj );
            for ( int k = 0; k < 3; ++k )
                fi[k] += s * d[k];
            ei += 0.5 * ( lj_energy( std::sqrt( r2 ), lj ) - shift );
        }
        for ( int k = 0; k < 3; ++k )
            f( i, k ) = fi[k];
        energies[i] = ei;
    } );

    double total = 0.0;
    for ( std::size_t i = 0; i < rows; ++i )
    {
        if ( overlap[i] )
            throw InvariantViolation( "lj_forces: overlapping particles at row " +
                                      std::to_string( i ) );
        total += energies[i];
    }
    return total;
}

//---------------------------------------------------------------------------//
// Single-domain state
//---------------------------------------------------------------------------//

//! x[3], v[3], f[3] float64 and an int64 global id.
inline FieldSchema md_schema()
{
    return { { "x", ScalarKind::Float64, { 3 } },
             { "v", ScalarKind::Float64, { 3 } },
             { "f", ScalarKind::Float64, { 3 } },
             { "id", ScalarKind::Int64, {} } };
}

struct MDState
{
    ParticleSet particles;
    Box box;
    LJParams lj;
    double dt = 0.005;
};

//! lj_forces on a fully periodic state; returns the potential energy.
inline double lj_forces( MDState& state, const VerletList& list,
                         ExecutionMode mode = ExecutionMode::Serial )
{
    return lj_forces( state.particles.slice<double>( "x" ),
                      state.particles.slice<double>( "f" ), list, state.box,
                      { true, true, true }, state.lj, mode );
}

//---------------------------------------------------------------------------//
// Driver
//---------------------------------------------------------------------------//

struct MDConfig
{
    //! FCC unit cells per axis; 4 atoms each.
    int cells = 4;
    double density = 0.8442;
    double temperature = 0.8;
    double dt = 0.005;
    int steps = 1000;
    LJParams lj{ 1.0, 1.0, 2.5, true };
    double mass = 1.0;
    double skin = 0.0;
    //! Maximum steps between neighbor rebuilds.
    int neighbor_stride = 1;
    //! Spatial resort every this many rebuild steps; 0 disables.
    int sort_stride = 0;
    Index3 ranks{ 1, 1, 1 };
    std::size_t vector_length = 16;
    ListLayout list_layout = ListLayout::Compressed;
    ExecutionMode mode = ExecutionMode::Serial;
    std::uint64_t seed = 1;
};

//! Global initial condition, indexed by particle id.
struct MDInitial
{
    Box box;
    std::vector<Vec3> x;
    std::vector<Vec3> v;
};

struct MDPhaseTimes
{
    double integrate = 0.0;
    double sort = 0.0;
    double migrate = 0.0;
    double halo = 0.0;
    double neighbor = 0.0;
    double force = 0.0;
};

struct MDRecord
{
    int step = 0;
    double kinetic = 0.0;
    double potential = 0.0;
    double total = 0.0;
    double temperature = 0.0;
    MDPhaseTimes ms;
};

//! Throws ConfigError on an unusable configuration.
inline void validate( const MDConfig& c, const Box& box )
{
    auto fail = []( const std::string& m ) { throw ConfigError( "md: " + m ); };
    if ( c.cells < 1 )
        fail( "cells must be >= 1" );
    if ( !( c.density > 0.0 ) )
        fail( "density must be positive" );
    if ( !( c.temperature >= 0.0 ) )
        fail( "temperature must be non-negative" );
    if ( !( c.dt > 0.0 ) )
        fail( "dt must be positive" );
    if ( c.steps < 0 )
        fail( "steps must be non-negative" );
    if ( !( c.lj.epsilon > 0.0 ) || !( c.lj.sigma > 0.0 ) || !( c.lj.r_cut > 0.0 ) )
        fail( "epsilon, sigma and r_cut must be positive" );
    if ( !( c.mass > 0.0 ) )
        fail( "mass must be positive" );
    if ( !( c.skin >= 0.0 ) )
        fail( "skin must be non-negative" );
    if ( c.neighbor_stride < 1 )
        fail( "neighbor_stride must be >= 1" );
    if ( c.neighbor_stride > 1 && c.skin == 0.0 )
        fail( "neighbor_stride > 1 requires a positive skin" );
    if ( c.sort_stride < 0 )
        fail( "sort_stride must be non-negative" );
    if ( c.vector_length == 0 )
        fail( "vector_length must be positive" );
    const double w = c.lj.r_cut + c.skin;
    for ( int d = 0; d < 3; ++d )
    {
        if ( c.ranks[d] < 1 )
            fail( "rank dims must be >= 1" );
        if ( !( 2.0 * w < box.length( d ) ) )
            fail( "r_cut + skin must be below half the box" );
        if ( w > box.length( d ) / c.ranks[d] )
            fail( "r_cut + skin exceeds a rank block edge" );
    }
}

//! Cubic box edge for the configured cells and density.
inline double md_box_length( const MDConfig& c )
{
    return std::cbrt( 4.0 * c.cells * c.cells * c.cells / c.density );
}

/*!
  \brief FCC lattice with seeded Gaussian velocities, zero total momentum and
  kinetic temperature c.temperature over 3N - 3 degrees of freedom.
*/
inline MDInitial fcc_lattice( const MDConfig& c )
{
    if ( c.cells < 1 || !( c.density > 0.0 ) )
        throw ConfigError( "md: cells and density must be positive" );
    MDInitial init;
    const double L = md_box_length( c );
    const double a = L / c.cells;
    init.box = Box::cube( L );
    const double basis[4][3] = { { 0, 0, 0 }, { .5, .5, 0 }, { .5, 0, .5 }, { 0, .5, .5 } };
    for ( int i = 0; i < c.cells; ++i )
        for ( int j = 0; j < c.cells; ++j )
            for ( int k = 0; k < c.cells; ++k )
                for ( const auto& b : basis )
                    init.x.push_back( { ( i + b[0] + 0.25 ) * a, ( j + b[1] + 0.25 ) * a,
                                        ( k + b[2] + 0.25 ) * a } );

    const std::size_t n = init.x.size();
    init.v.assign( n, { 0.0, 0.0, 0.0 } );
    if ( c.temperature == 0.0 || n < 2 )
        return init;
    std::mt19937_64 rng( c.seed );
    std::normal_distribution<double> g( 0.0, 1.0 );
    Vec3 mean{ 0.0, 0.0, 0.0 };
    for ( auto& v : init.v )
        for ( int d = 0; d < 3; ++d )
        {
            v[d] = g( rng );
            mean[d] += v[d];
        }
    double sum2 = 0.0;
    for ( auto& v : init.v )
        for ( int d = 0; d < 3; ++d )
        {
            v[d] -= mean[d] / n;
            sum2 += c.mass * v[d] * v[d];
        }
    const double scale = std::sqrt( c.temperature * ( 3.0 * n - 3.0 ) / sum2 );
    for ( auto& v : init.v )
        for ( int d = 0; d < 3; ++d )
            v[d] *= scale;
    return init;
}

/*!
  \brief Velocity-Verlet NVE over a domain fabric.

  Every run, including a single rank, goes through migrate and halo exchange
  so that ghosts hold identically rounded image positions. Neighbor rows are
  ordered by global id and global sums are taken in id order, so the energy
  series is bitwise independent of rank count, vector length and execution
  mode.
*/
class MDSimulation
{
  public:
    MDSimulation( const MDConfig& config, const MDInitial& init )
        : _config( config )
        , _box( init.box )
    {
        validate( _config, _box );
        if ( init.x.size() != init.v.size() || init.x.empty() )
            throw ConfigError( "md: initial positions and velocities mismatch" );
        _n = init.x.size();
        _fabric = decompose( _box, _config.ranks, { true, true, true } );
        _ranks = make_rank_particles( _fabric, md_schema(), _config.vector_length );

        auto& seed = _ranks[0];
        seed.particles.resize( _n );
        auto x = seed.particles.slice<double>( "x" );
        auto v = seed.particles.slice<double>( "v" );
        auto id = seed.particles.slice<std::int64_t>( "id" );
        for ( std::size_t i = 0; i < _n; ++i )
        {
            for ( int d = 0; d < 3; ++d )
            {
                x( i, d ) = init.x[i][d];
                v( i, d ) = init.v[i][d];
            }
            id( i ) = static_cast<std::int64_t>( i );
        }
        seed.owned = _n;

        MDPhaseTimes t;
        rebuild( t, false );
        compute_forces( t );
        _records.push_back( record( t ) );
    }

    explicit MDSimulation( const MDConfig& config )
        : MDSimulation( config, fcc_lattice( config ) )
    {
    }

    //! One velocity-Verlet step; appends an MDRecord.
    void step()
    {
        MDPhaseTimes t;
        const double dt = _config.dt;
        const double h = 0.5 * dt / _config.mass;

        auto start = Clock::now();
        for ( auto& r : _ranks )
        {
            auto x = r.particles.slice<double>( "x" );
            auto v = r.particles.slice<double>( "v" );
            auto f = r.particles.slice<double>( "f" );
            parallel_for( _config.mode, 0, r.owned, [&]( std::size_t i ) {
                for ( int d = 0; d < 3; ++d )
                {
                    v( i, d ) += h * f( i, d );
                    x( i, d ) += dt * v( i, d );
                }
            } );
        }
        t.integrate += elapsed_ms( start );

        ++_step;
        if ( _step % _config.neighbor_stride == 0 || displaced() )
            rebuild( t, _config.sort_stride > 0 && ( ++_rebuilds % _config.sort_stride == 0 ) );
        else
        {
            start = Clock::now();
            halo_gather( _fabric, _plan, _ranks, { "x" } );
            t.halo += elapsed_ms( start );
        }
        compute_forces( t );

        start = Clock::now();
        for ( auto& r : _ranks )
        {
            auto v = r.particles.slice<double>( "v" );
            auto f = r.particles.slice<double>( "f" );
            parallel_for( _config.mode, 0, r.owned, [&]( std::size_t i ) {
                for ( int d = 0; d < 3; ++d )
                    v( i, d ) += h * f( i, d );
            } );
        }
        t.integrate += elapsed_ms( start );
        _records.push_back( record( t ) );
    }

    void run( int steps )
    {
        for ( int s = 0; s < steps; ++s )
            step();
    }

    const std::vector<MDRecord>& records() const { return _records; }
    const MDRecord& last() const { return _records.back(); }
    int current_step() const { return _step; }
    std::size_t size() const { return _n; }
    const Box& box() const { return _box; }
    const DomainFabric& fabric() const { return _fabric; }
    const RankParticles& ranks() const { return _ranks; }
    //! Neighbor list rebuilds so far, including the initial one.
    int neighbor_builds() const { return _builds; }

    //! Owned values of a 3-vector field, indexed by global id.
    std::vector<Vec3> gather( const std::string& field ) const
    {
        std::vector<Vec3> out( _n );
        for ( const auto& r : _ranks )
        {
            auto v = r.particles.slice<double>( field );
            auto id = r.particles.slice<std::int64_t>( "id" );
            for ( std::size_t i = 0; i < r.owned; ++i )
                out[id( i )] = { v( i, 0 ), v( i, 1 ), v( i, 2 ) };
        }
        return out;
    }

    //! Total momentum summed in id order.
    Vec3 momentum() const
    {
        Vec3 p{ 0.0, 0.0, 0.0 };
        for ( const auto& v : gather( "v" ) )
            for ( int d = 0; d < 3; ++d )
                p[d] += _config.mass * v[d];
        return p;
    }

    void negate_velocities()
    {
        for ( auto& r : _ranks )
        {
            auto v = r.particles.slice<double>( "v" );
            for ( std::size_t i = 0; i < r.owned; ++i )
                for ( int d = 0; d < 3; ++d )
                    v( i, d ) = -v( i, d );
        }
    }

  private:
    using Clock = std::chrono::steady_clock;

    static double elapsed_ms( Clock::time_point start )
    {
        return std::chrono::duration<double, std::milli>( Clock::now() - start ).count();
    }

    double halo_width() const { return _config.lj.r_cut + _config.skin; }

    bool displaced() const
    {
        if ( _config.skin == 0.0 )
            return true;
        const double limit = 0.25 * _config.skin * _config.skin;
        for ( std::size_t r = 0; r < _ranks.size(); ++r )
        {
            auto x = _ranks[r].particles.slice<double>( "x" );
            const auto& ref = _reference[r];
            for ( std::size_t i = 0; i < _ranks[r].owned; ++i )
            {
                double d2 = 0.0;
                for ( int d = 0; d < 3; ++d )
                {
                    const double dx = x( i, d ) - ref[i][d];
                    d2 += dx * dx;
                }
                if ( d2 > limit )
                    return true;
            }
        }
        return false;
    }

    void rebuild( MDPhaseTimes& t, bool sort )
    {
        auto start = Clock::now();
        migrate( _fabric, _ranks, "x" );
        t.migrate += elapsed_ms( start );

        if ( sort )
        {
            start = Clock::now();
            const double edge = halo_width();
            for ( int r = 0; r < _fabric.size(); ++r )
            {
                auto& set = _ranks[r].particles;
                auto bins = bin_by_position( std::as_const( set ).slice<double>( "x" ),
                                             _fabric.local_box( r ), { edge, edge, edge } );
                permute( set, bins.permutation );
            }
            t.sort += elapsed_ms( start );
        }

        start = Clock::now();
        _plan = build_halo( _fabric, _ranks, halo_width() );
        halo_gather( _fabric, _plan, _ranks, { "x", "id" } );
        t.halo += elapsed_ms( start );

        start = Clock::now();
        _lists.resize( _ranks.size() );
        _reference.resize( _ranks.size() );
        for ( int r = 0; r < _fabric.size(); ++r )
        {
            const auto& set = _ranks[r].particles;
            NeighborOptions opt;
            opt.layout = _config.list_layout;
            opt.convention = PairConvention::Full;
            opt.num_rows = _ranks[r].owned;
            opt.mode = _config.mode;
            _lists[r] = build_verlet( set.slice<double>( "x" ),
                                      _fabric.local_box( r ).expanded( halo_width() ),
                                      { false, false, false }, halo_width(), opt );
            auto id = set.slice<std::int64_t>( "id" );
            std::vector<std::int64_t> keys( set.size() );
            for ( std::size_t i = 0; i < keys.size(); ++i )
                keys[i] = id( i );
            _lists[r].sort_rows( std::span<const std::int64_t>( keys ) );

            auto x = set.slice<double>( "x" );
            _reference[r].resize( _ranks[r].owned );
            for ( std::size_t i = 0; i < _ranks[r].owned; ++i )
                _reference[r][i] = { x( i, 0 ), x( i, 1 ), x( i, 2 ) };
        }
        ++_builds;
        t.neighbor += elapsed_ms( start );
    }

    void compute_forces( MDPhaseTimes& t )
    {
        auto start = Clock::now();
        _energy.resize( _ranks.size() );
        for ( int r = 0; r < _fabric.size(); ++r )
        {
            auto& set = _ranks[r].particles;
            _energy[r].assign( _ranks[r].owned, 0.0 );
            lj_forces( std::as_const( set ).slice<double>( "x" ), set.slice<double>( "f" ),
                       _lists[r], _fabric.local_box( r ), { false, false, false },
                       _config.lj, _config.mode, _energy[r] );
        }
        t.force += elapsed_ms( start );
    }

    MDRecord record( const MDPhaseTimes& t ) const
    {
        std::vector<double> ke( _n, 0.0 ), pe( _n, 0.0 );
        for ( std::size_t r = 0; r < _ranks.size(); ++r )
        {
            auto v = _ranks[r].particles.slice<double>( "v" );
            auto id = _ranks[r].particles.slice<std::int64_t>( "id" );
            for ( std::size_t i = 0; i < _ranks[r].owned; ++i )
            {
                ke[id( i )] = 0.5 * _config.mass *
                              ( v( i, 0 ) * v( i, 0 ) + v( i, 1 ) * v( i, 1 ) +
                                v( i, 2 ) * v( i, 2 ) );
                pe[id( i )] = _energy[r][i];
            }
        }
        MDRecord rec;
        rec.step = _step;
        for ( std::size_t i = 0; i < _n; ++i )
        {
            rec.kinetic += ke[i];
            rec.potential += pe[i];
        }
        rec.total = rec.kinetic + rec.potential;
        rec.temperature = _n > 1 ? 2.0 * rec.kinetic / ( 3.0 * _n - 3.0 ) : 0.0;
        rec.ms = t;
        return rec;
    }

    MDConfig _config;
    Box _box;
    std::size_t _n = 0;
    DomainFabric _fabric;
    RankParticles _ranks;
    HaloPlan _plan;
    std::vector<VerletList> _lists;
    std::vector<std::vector<double>> _energy;
    std::vector<std::vector<Vec3>> _reference;
    std::vector<MDRecord> _records;
    int _step = 0;
    int _rebuilds = 0;
    int _builds = 0;
};

inline void velocity_verlet_step( MDSimulation& sim ) { sim.step(); }

//! Runs config.steps steps from the FCC start; returns steps + 1 records.
inline std::vector<MDRecord> run_md( const MDConfig& config )
{
    MDSimulation sim( config );
    sim.run( config.steps );
    return sim.records();
}

} // namespace particula

#endif // PARTICULA_MD_HPP
