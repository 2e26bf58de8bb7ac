#include <particula/pic.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace particula;

namespace
{

constexpr double eps = std::numeric_limits<double>::epsilon();

ParticleSet single_particle( const Vec3& x, const Vec3& v, double q = 1.0, double m = 1.0 )
{
    ParticleSet p( pic_schema(), 4, 1 );
    auto px = p.slice<double>( "x" );
    auto pv = p.slice<double>( "v" );
    for ( int d = 0; d < 3; ++d )
    {
        px( 0, d ) = x[d];
        pv( 0, d ) = v[d];
    }
    p.slice<double>( "q" )( 0 ) = q;
    p.slice<double>( "m" )( 0 ) = m;
    p.slice<double>( "w" )( 0 ) = 1.0;
    return p;
}

double speed( const ParticleSet& p )
{
    auto v = p.slice<double>( "v" );
    return std::sqrt( v( 0, 0 ) * v( 0, 0 ) + v( 0, 1 ) * v( 0, 1 ) + v( 0, 2 ) * v( 0, 2 ) );
}

// Plasma on a 1-D lattice along x: n per cell, displaced by delta sin(k x).
PICState cold_lattice( int cells, int per_cell, double delta, double dt, double drift = 0.0 )
{
    PlasmaConfig c;
    c.cells = { cells, 1, 1 };
    c.lengths = { 2.0 * std::numbers::pi, 1.0, 1.0 };
    c.particles = static_cast<std::size_t>( cells * per_cell );
    c.dt = dt;
    auto s = make_plasma( c );
    auto x = s.particles.slice<double>( "x" );
    auto v = s.particles.slice<double>( "v" );
    const double L = c.lengths[0];
    for ( std::size_t i = 0; i < c.particles; ++i )
    {
        const double x0 = ( i + 0.5 ) * L / c.particles;
        x( i, 0 ) = x0 + delta * std::sin( x0 );
        v( i, 0 ) = drift;
    }
    return s;
}

PlasmaConfig small_beams()
{
    PlasmaConfig c;
    c.cells = { 32, 32, 1 };
    c.lengths = { 3.2, 3.2, 1.0 };
    c.particles = 8000;
    c.beam_speed = 1.0;
    c.amplitude = 0.01;
    c.order = 2;
    c.filter = true;
    c.dt = 0.5;
    return c;
}

} // namespace

//---------------------------------------------------------------------------//
// Boris
//---------------------------------------------------------------------------//

TEST( pic, boris_free_streaming )
{
    auto p = single_particle( { 1.0, 2.0, 3.0 }, { 0.3, -0.7, 0.11 } );
    boris_push( p, { 0.0, 0.0, 0.0 }, 0.1 );
    auto x = p.slice<double>( "x" );
    EXPECT_EQ( x( 0, 0 ), 1.0 + 0.1 * 0.3 );
    EXPECT_EQ( x( 0, 1 ), 2.0 + 0.1 * -0.7 );
    EXPECT_EQ( x( 0, 2 ), 3.0 + 0.1 * 0.11 );
}

TEST( pic, boris_rotation_preserves_speed )
{
    auto p = single_particle( { 0.0, 0.0, 0.0 }, { 0.8, 0.1, 0.3 } );
    const double v0 = speed( p );
    double prev = v0;
    for ( int s = 0; s < 10000; ++s )
    {
        boris_push( p, { 0.3, -0.2, 1.1 }, 0.05 );
        const double now = speed( p );
        ASSERT_LE( std::abs( now - prev ), 4 * eps * v0 ) << "step " << s;
        prev = now;
    }
    EXPECT_LT( std::abs( prev - v0 ), 1e-12 );
}

TEST( pic, boris_gyration_period )
{
    const double q = 2.0, m = 0.5, B = 0.25;
    const double omega = q * B / m;
    const double dt = 0.01 / omega;
    auto p = single_particle( { 0.0, 0.0, 0.0 }, { 1.0, 0.0, 0.0 }, q, m );
    auto v = p.slice<double>( "v" );
    // Times at which v_x crosses zero going upward.
    std::vector<double> crossings;
    double prev = v( 0, 0 );
    for ( int s = 1; s < 5 * 700; ++s )
    {
        boris_push( p, { 0.0, 0.0, B }, dt );
        const double now = v( 0, 0 );
        if ( prev < 0.0 && now >= 0.0 )
            crossings.push_back( ( s - 1 + prev / ( prev - now ) ) * dt );
        prev = now;
    }
    ASSERT_GE( crossings.size(), 3u );
    const double period = ( crossings.back() - crossings.front() ) / ( crossings.size() - 1 );
    EXPECT_LT( std::abs( period - 2 * std::numbers::pi / omega ) / ( 2 * std::numbers::pi / omega ),
               1e-3 );
}

//---------------------------------------------------------------------------//
// Filter
//---------------------------------------------------------------------------//

TEST( pic, filter_keeps_constant_and_kills_nyquist )
{
    StructuredGrid g( Box{ { 0, 0, 0 }, { 1, 1, 1 } }, { 8, 4, 1 }, { true, true, true } );
    NodeField c( g );
    c.fill( 2.5 );
    binomial_filter( c );
    for ( auto v : c.data() )
        EXPECT_EQ( v, 2.5 );

    NodeField nyq( g );
    for ( std::size_t n = 0; n < g.num_nodes(); ++n )
    {
        const auto i = g.node_coordinate( n );
        nyq( n ) = ( i[0] + i[1] ) % 2 ? -1.0 : 1.0;
    }
    binomial_filter( nyq );
    for ( auto v : nyq.data() )
        EXPECT_EQ( v, 0.0 );
}

TEST( pic, filter_matches_convolution )
{
    StructuredGrid g( Box{ { 0, 0, 0 }, { 1, 1, 1 } }, { 8, 16, 1 }, { true, true, true } );
    NodeField f( g );
    std::mt19937_64 rng( 3 );
    std::uniform_real_distribution<double> u( -1.0, 1.0 );
    for ( auto& v : f.data() )
        v = u( rng );
    const auto src = f;
    binomial_filter( f );
    const double k[3] = { 0.25, 0.5, 0.25 };
    for ( int i = 0; i < 8; ++i )
        for ( int j = 0; j < 16; ++j )
        {
            double oracle = 0.0;
            for ( int a = -1; a <= 1; ++a )
                for ( int b = -1; b <= 1; ++b )
                    oracle += k[a + 1] * k[b + 1] *
                              src( g.node_index( ( i + a + 8 ) % 8, ( j + b + 16 ) % 16, 0 ) );
            EXPECT_NEAR( f( g.node_index( i, j, 0 ) ), oracle, 1e-15 );
        }
}

TEST( pic, filter_is_symmetric_with_unit_gain )
{
    StructuredGrid g( Box{ { 0, 0, 0 }, { 1, 1, 1 } }, { 8, 8, 1 }, { true, true, true } );
    const std::size_t n = g.num_nodes();
    std::vector<NodeField> columns;
    for ( std::size_t a = 0; a < n; ++a )
    {
        NodeField e( g );
        e( a ) = 1.0;
        binomial_filter( e );
        EXPECT_NEAR( e.sum(), 1.0, 1e-15 );
        columns.push_back( e );
    }
    for ( std::size_t a = 0; a < n; ++a )
        for ( std::size_t b = 0; b < n; ++b )
            EXPECT_EQ( columns[a]( b ), columns[b]( a ) );
}

//---------------------------------------------------------------------------//
// Explicit step
//---------------------------------------------------------------------------//

TEST( pic, deposit_conserves_charge )
{
    for ( int order : { 1, 2, 3 } )
    {
        auto c = small_beams();
        c.order = order;
        auto s = make_plasma( c );
        s.background = 0.0;
        deposit_and_solve( s );
        auto q = s.particles.slice<double>( "q" );
        double total = 0.0;
        for ( std::size_t i = 0; i < s.particles.size(); ++i )
            total += q( i );
        EXPECT_NEAR( s.rho.sum() * s.grid.cell_volume(), total, 1e-12 * std::abs( total ) );
    }
}

TEST( pic, cold_uniform_plasma_is_at_rest )
{
    auto s = cold_lattice( 32, 4, 0.0, 0.1 );
    const auto x0 = s.particles;
    for ( int k = 0; k < 20; ++k )
    {
        auto d = es_explicit_step( s );
        EXPECT_LT( d.field, 1e-24 );
    }
    auto x = s.particles.slice<double>( "x" );
    auto xr = x0.slice<double>( "x" );
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        EXPECT_NEAR( x( i, 0 ), xr( i, 0 ), 1e-12 );
}

TEST( pic, langmuir_frequency )
{
    const double dt = 0.05;
    auto s = cold_lattice( 64, 8, 1e-3, dt );
    std::vector<double> x0( s.particles.size() );
    for ( std::size_t i = 0; i < x0.size(); ++i )
        x0[i] = ( i + 0.5 ) * 2.0 * std::numbers::pi / x0.size();
    std::vector<double> crossings;
    double prev = 0.0;
    for ( int k = 0; k < 800; ++k )
    {
        es_explicit_step( s );
        auto v = s.particles.slice<double>( "v" );
        double amp = 0.0;
        for ( std::size_t i = 0; i < x0.size(); ++i )
            amp += v( i, 0 ) * std::sin( x0[i] );
        if ( k > 0 && prev < 0.0 && amp >= 0.0 )
            crossings.push_back( ( k - 1 + prev / ( prev - amp ) ) * dt );
        prev = amp;
    }
    ASSERT_GE( crossings.size(), 3u );
    const double period = ( crossings.back() - crossings.front() ) / ( crossings.size() - 1 );
    EXPECT_LT( std::abs( 2 * std::numbers::pi / period - 1.0 ), 0.02 );
}

TEST( pic, explicit_momentum_conserved )
{
    for ( int order : { 1, 2 } )
    {
        auto c = small_beams();
        c.order = order;
        c.dt = 0.1;
        auto s = make_plasma( c );
        const auto p0 = total_momentum( s.particles );
        PICDiagnostics d;
        for ( int k = 0; k < 100; ++k )
            d = es_explicit_step( s );
        for ( int a = 0; a < 3; ++a )
            EXPECT_LT( std::abs( d.momentum[a] - p0[a] ), 1e-10 );
    }
}

TEST( pic, layout_does_not_change_physics )
{
    auto run = []( std::size_t V, int sort_stride ) {
        auto c = small_beams();
        c.dt = 0.1;
        c.vector_length = V;
        c.sort_stride = sort_stride;
        auto s = make_plasma( c );
        std::vector<double> out;
        for ( int k = 0; k < 10; ++k )
        {
            auto d = es_explicit_step( s );
            out.push_back( d.kinetic );
            out.push_back( d.field );
        }
        return out;
    };
    const auto ref = run( 16, 0 );
    for ( std::size_t V : { 1u, 4u, 8u, 8000u } )
        EXPECT_EQ( run( V, 0 ), ref );
    EXPECT_EQ( run( 1, 3 ), run( 8000, 3 ) );
}

//---------------------------------------------------------------------------//
// Implicit step
//---------------------------------------------------------------------------//

TEST( pic, implicit_free_streaming_converges_at_once )
{
    auto s = cold_lattice( 16, 2, 0.0, 0.3, 0.7 );
    auto q = s.particles.slice<double>( "q" );
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        q( i ) = 0.0;
    s.background = 0.0;
    const auto before = s.particles;
    auto d = cn_implicit_step( s, 1e-13, 20 );
    EXPECT_EQ( d.iterations, 1 );
    auto x = s.particles.slice<double>( "x" );
    auto xb = before.slice<double>( "x" );
    const double L = s.grid.box().length( 0 );
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        EXPECT_EQ( x( i, 0 ), wrap_coordinate( xb( i, 0 ) + 0.3 * 0.7, 0.0, L ) );
}

TEST( pic, implicit_uniform_drift_in_neutral_plasma )
{
    auto s = cold_lattice( 16, 2, 0.0, 0.3, 0.7 );
    auto d = cn_implicit_step( s, 1e-13, 20 );
    EXPECT_EQ( d.iterations, 1 );
    EXPECT_LT( d.field, 1e-24 );
}

TEST( pic, implicit_conserves_energy_where_explicit_drifts )
{
    auto c = small_beams();
    auto implicit = make_plasma( c );
    EXPECT_NEAR( c.dt / explicit_time_step_limit( implicit ), 5.0, 1e-12 );
    const double tol = 1e-13;
    const double e0 = pic_energies( implicit ).total;
    double prev = e0, worst_step = 0.0, drift = 0.0;
    for ( int k = 0; k < 60; ++k )
    {
        auto d = cn_implicit_step( implicit, tol, 100 );
        worst_step = std::max( worst_step, std::abs( d.total - prev ) / std::abs( e0 ) );
        drift = std::max( drift, std::abs( d.total - e0 ) / std::abs( e0 ) );
        prev = d.total;
    }
    EXPECT_LT( drift, 1e-10 );
    EXPECT_LE( worst_step, 10 * tol );

    auto explicit_run = make_plasma( c );
    double explicit_drift = 0.0;
    for ( int k = 0; k < 60; ++k )
    {
        auto d = es_explicit_step( explicit_run );
        explicit_drift = std::max( explicit_drift, std::abs( d.total - e0 ) / std::abs( e0 ) );
    }
    EXPECT_GE( explicit_drift, 100 * drift );
}

TEST( pic, implicit_reports_non_convergence )
{
    auto s = make_plasma( small_beams() );
    const auto before = s.particles;
    try
    {
        cn_implicit_step( s, 1e-13, 2 );
        FAIL() << "expected ConvergenceError";
    }
    catch ( const ConvergenceError& e )
    {
        EXPECT_EQ( e.iterations(), 2 );
        EXPECT_GT( e.residual(), 1e-13 );
    }
    auto x = s.particles.slice<double>( "x" );
    auto xb = before.slice<double>( "x" );
    for ( std::size_t i = 0; i < s.particles.size(); ++i )
        ASSERT_EQ( x( i, 0 ), xb( i, 0 ) );
    EXPECT_THROW( cn_implicit_step( s, 0.0, 5 ), std::invalid_argument );
}

//---------------------------------------------------------------------------//
// Sparse grids
//---------------------------------------------------------------------------//

TEST( pic, sgct_combination_coefficients )
{
    SGCTConfig cfg;
    cfg.level = 5;
    const auto comps = cfg.components();
    int plus = 0, minus = 0;
    double sum = 0.0;
    for ( const auto& c : comps )
    {
        ( c.coefficient > 0 ? plus : minus )++;
        sum += c.coefficient;
        EXPECT_GE( std::min( c.lx, c.ly ), 1 );
        const auto g = cfg.grid( c.lx, c.ly );
        EXPECT_EQ( g.nodes( 0 ), 1 << c.lx );
        EXPECT_EQ( g.nodes( 1 ), 1 << c.ly );
    }
    EXPECT_EQ( plus, 5 );
    EXPECT_EQ( minus, 4 );
    EXPECT_EQ( sum, 1.0 );

    cfg.base = 4;
    EXPECT_THROW( cfg.components(), std::invalid_argument );
}

TEST( pic, sgct_single_particle_mass )
{
    SGCTConfig cfg;
    cfg.level = 5;
    cfg.lengths = { 2.0, 3.0, 1.0 };
    ParticleSet p( { { "x", ScalarKind::Float64, { 3 } }, { "q", ScalarKind::Float64, {} } }, 4, 1 );
    auto x = p.slice<double>( "x" );
    x( 0, 0 ) = 1.234;
    x( 0, 1 ) = 0.377;
    x( 0, 2 ) = 0.5;
    p.slice<double>( "q" )( 0 ) = 0.8;
    const auto& cp = p;
    auto r = sgct_deposit( cp.slice<double>( "x" ), cp.slice<double>( "q" ), cfg );
    const auto dense = cfg.dense_grid();
    EXPECT_NEAR( r.combined.sum() * dense.cell_volume(), 0.8, 1e-12 );
    for ( std::size_t k = 0; k < r.components.size(); ++k )
    {
        const auto g = cfg.grid( r.components[k].lx, r.components[k].ly );
        EXPECT_NEAR( r.component_density[k].sum() * g.cell_volume(), 0.8, 1e-14 );
    }
}

TEST( pic, sgct_reduces_noise_with_level_trend )
{
    double last_ratio = 1.0;
    for ( int n : { 4, 5, 6 } )
    {
        const auto row = sgct_variance( n, 200000, 17 );
        EXPECT_LT( row.variance_sgct, row.variance_dense ) << "level " << n;
        const double ratio = row.variance_sgct / row.variance_dense;
        EXPECT_LT( ratio, last_ratio ) << "level " << n;
        last_ratio = ratio;
    }
}
