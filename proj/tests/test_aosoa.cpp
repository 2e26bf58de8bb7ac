#include <particula/aosoa.hpp>

#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <set>

using namespace particula;

namespace
{

FieldSchema mixed_schema()
{
    return { { "x", ScalarKind::Float64, { 3 } },
             { "m", ScalarKind::Float64, {} },
             { "stress", ScalarKind::Float64, { 3, 3 } },
             { "id", ScalarKind::Int64, {} } };
}

void fill_random( ParticleSet& set, unsigned seed )
{
    std::mt19937_64 rng( seed );
    std::uniform_real_distribution<double> u( -1.0, 1.0 );
    auto x = set.slice<double>( "x" );
    auto m = set.slice<double>( "m" );
    auto stress = set.slice<double>( "stress" );
    auto id = set.slice<std::int64_t>( "id" );
    for ( std::size_t i = 0; i < set.size(); ++i )
    {
        for ( int d = 0; d < 3; ++d )
            x( i, d ) = u( rng );
        m( i ) = u( rng );
        for ( int a = 0; a < 3; ++a )
            for ( int b = 0; b < 3; ++b )
                stress( i, a, b ) = u( rng );
        id( i ) = static_cast<std::int64_t>( rng() );
    }
}

// Elementwise comparison over every (particle, component) of every field.
bool tuples_equal( const ParticleSet& a, const ParticleSet& b )
{
    if ( a.size() != b.size() || !( a.schema() == b.schema() ) )
        return false;
    for ( const auto& f : a.schema().fields() )
    {
        for ( std::size_t i = 0; i < a.size(); ++i )
            for ( std::size_t c = 0; c < f.components(); ++c )
            {
                const bool same =
                    f.kind == ScalarKind::Float64
                        ? a.slice<double>( f.name )( i, c ) ==
                              b.slice<double>( f.name )( i, c )
                        : a.slice<std::int64_t>( f.name )( i, c ) ==
                              b.slice<std::int64_t>( f.name )( i, c );
                if ( !same )
                    return false;
            }
    }
    return true;
}

} // namespace

TEST( aosoa, schema_rejects_duplicates_and_zero_extent )
{
    EXPECT_THROW( ( FieldSchema{ { "a", ScalarKind::Float64, {} },
                                 { "a", ScalarKind::Int64, {} } } ),
                  std::invalid_argument );
    EXPECT_THROW( ( FieldSchema{ { "a", ScalarKind::Float64, { 3, 0 } } } ),
                  std::invalid_argument );
}

TEST( aosoa, create_aos_zeroed )
{
    ParticleSet set( { { "x", ScalarKind::Float64, { 3 } } }, 1, 5 );
    EXPECT_EQ( set.size(), 5u );
    EXPECT_EQ( set.capacity(), 5u );
    auto x = set.slice<double>( "x" );
    for ( std::size_t i = 0; i < 5; ++i )
        for ( int d = 0; d < 3; ++d )
            EXPECT_EQ( x( i, d ), 0.0 );
}

TEST( aosoa, create_empty )
{
    ParticleSet set( { { "m", ScalarKind::Float64, {} } }, 4, 0 );
    EXPECT_EQ( set.size(), 0u );
    EXPECT_EQ( set.capacity(), 0u );
    EXPECT_TRUE( set.float_storage().empty() );
}

TEST( aosoa, zero_vector_length_rejected )
{
    EXPECT_THROW( ParticleSet( mixed_schema(), 0, 3 ), std::invalid_argument );
}

TEST( aosoa, index_map )
{
    ParticleSet set( mixed_schema(), 4, 11 );
    EXPECT_EQ( set.struct_index( 10 ), 2u );
    EXPECT_EQ( set.lane_index( 10 ), 2u );
    EXPECT_EQ( set.capacity(), 12u );
    for ( std::size_t V : { 1u, 3u, 4u, 16u, 64u } )
    {
        ParticleSet s( mixed_schema(), V, 37 );
        EXPECT_EQ( s.capacity() % V, 0u );
        for ( std::size_t i = 0; i < s.size(); ++i )
        {
            EXPECT_LT( s.lane_index( i ), V );
            EXPECT_EQ( s.struct_index( i ) * V + s.lane_index( i ), i );
        }
    }
}

TEST( aosoa, slice_roundtrip_and_kind_checks )
{
    ParticleSet set( mixed_schema(), 8, 10 );
    auto v = set.slice<double>( "x" );
    v( 7, 0 ) = 1.0;
    v( 7, 1 ) = 2.0;
    v( 7, 2 ) = 3.0;
    const ParticleSet& cset = set;
    auto cv = cset.slice<double>( "x" );
    EXPECT_EQ( cv( 7, 0 ), 1.0 );
    EXPECT_EQ( cv( 7, 1 ), 2.0 );
    EXPECT_EQ( cv( 7, 2 ), 3.0 );
    EXPECT_THROW( set.slice<double>( "nope" ), std::out_of_range );
    EXPECT_THROW( set.slice<std::int64_t>( "x" ), std::invalid_argument );

    auto s = set.slice<double>( "stress" );
    s( 4, 1, 2 ) = 5.0;
    EXPECT_EQ( s( 4, 5 ), 5.0 );
}

TEST( aosoa, slices_are_disjoint )
{
    ParticleSet set( mixed_schema(), 4, 9 );
    std::set<const double*> x_addr, m_addr;
    auto x = set.slice<double>( "x" );
    auto m = set.slice<double>( "m" );
    for ( std::size_t i = 0; i < set.size(); ++i )
    {
        for ( int d = 0; d < 3; ++d )
            x_addr.insert( x.address( i, d ) );
        m_addr.insert( m.address( i ) );
    }
    EXPECT_EQ( x_addr.size(), 27u );
    EXPECT_EQ( m_addr.size(), 9u );
    for ( auto* p : m_addr )
        EXPECT_EQ( x_addr.count( p ), 0u );
}

TEST( aosoa, copy_through_views_between_layouts )
{
    ParticleSet a( mixed_schema(), 1, 50 );
    ParticleSet b( mixed_schema(), 8, 50 );
    fill_random( a, 3 );
    auto xa = a.slice<double>( "x" );
    auto xb = b.slice<double>( "x" );
    for ( std::size_t i = 0; i < a.size(); ++i )
        for ( int d = 0; d < 3; ++d )
            xb( i, d ) = xa( i, d );
    for ( std::size_t i = 0; i < a.size(); ++i )
        for ( int d = 0; d < 3; ++d )
            EXPECT_EQ( xb( i, d ), xa( i, d ) );
}

TEST( aosoa, deep_copy_across_layouts )
{
    ParticleSet a( mixed_schema(), 1, 100 );
    fill_random( a, 11 );
    ParticleSet b( mixed_schema(), 16, 100 );
    deep_copy( b, a );
    EXPECT_TRUE( tuples_equal( a, b ) );

    // Chained copies preserve every tuple.
    ParticleSet c( mixed_schema(), 5, 100 );
    deep_copy( c, b );
    EXPECT_TRUE( tuples_equal( a, c ) );

    deep_copy( a, a );
    EXPECT_TRUE( tuples_equal( a, c ) );

    ParticleSet e1( mixed_schema(), 4, 0 ), e2( mixed_schema(), 2, 0 );
    EXPECT_NO_THROW( deep_copy( e1, e2 ) );
}

TEST( aosoa, deep_copy_mismatch_rejected )
{
    ParticleSet a( mixed_schema(), 4, 10 );
    ParticleSet b( mixed_schema(), 4, 11 );
    ParticleSet c( { { "x", ScalarKind::Float64, { 3 } } }, 4, 10 );
    EXPECT_THROW( deep_copy( b, a ), std::invalid_argument );
    EXPECT_THROW( deep_copy( c, a ), std::invalid_argument );
}

TEST( aosoa, resize_keeps_padding_zero )
{
    ParticleSet set( mixed_schema(), 4, 8 );
    fill_random( set, 5 );
    set.resize( 6 );
    // Lanes 6 and 7 of struct 1 are padding now.
    for ( std::size_t k = 0; k < set.float_storage().size(); ++k )
    {
        const std::size_t lane = k % 4;
        const std::size_t s = k / ( 4 * 13 );
        if ( s == 1 && lane >= 2 )
        {
            EXPECT_EQ( set.float_storage()[k], 0.0 );
        }
    }
    set.resize( 8 );
    auto m = set.slice<double>( "m" );
    EXPECT_EQ( m( 6 ), 0.0 );
    EXPECT_EQ( m( 7 ), 0.0 );
}

TEST( aosoa, pack_unpack_roundtrip )
{
    ParticleSet a( mixed_schema(), 3, 7 );
    fill_random( a, 21 );
    ParticleSet b( mixed_schema(), 16, 7 );
    std::vector<std::byte> buf;
    for ( std::size_t i = 0; i < a.size(); ++i )
        a.pack( i, buf );
    EXPECT_EQ( buf.size(), 7 * a.tuple_bytes() );
    const std::byte* p = buf.data();
    for ( std::size_t i = 0; i < b.size(); ++i )
        p += b.unpack( i, p );
    EXPECT_TRUE( tuples_equal( a, b ) );
}

TEST( aosoa, simd_for_each_counts )
{
    for ( std::size_t V : { 1u, 4u, 8u, 16u } )
    {
        ParticleSet set( mixed_schema(), V, 1000 );
        std::size_t total = 0;
        simd_for_each( set, [&]( std::size_t, std::size_t ) { ++total; } );
        EXPECT_EQ( total, 1000u );
    }
}

TEST( aosoa, simd_for_each_histogram )
{
    for ( std::size_t V : { 1u, 4u, 5u, 16u } )
    {
        ParticleSet set( mixed_schema(), V, 30 );
        std::vector<int> hits( 30, 0 );
        std::vector<std::size_t> order;
        simd_for_each( set, 3, 17, [&]( std::size_t s, std::size_t a ) {
            hits[s * V + a]++;
            order.push_back( s * V + a );
        } );
        for ( std::size_t i = 0; i < 30; ++i )
            EXPECT_EQ( hits[i], ( i >= 3 && i < 17 ) ? 1 : 0 );
        EXPECT_TRUE( std::is_sorted( order.begin(), order.end() ) );
    }
}

TEST( aosoa, simd_for_each_parallel_histogram )
{
    ParticleSet set( mixed_schema(), 4, 103 );
    std::vector<int> hits( 103, 0 );
    simd_for_each(
        set, 1, 102,
        [&]( std::size_t s, std::size_t a ) { hits[s * 4 + a]++; },
        ExecutionMode::Parallel );
    for ( std::size_t i = 0; i < 103; ++i )
        EXPECT_EQ( hits[i], ( i >= 1 && i < 102 ) ? 1 : 0 );
}

TEST( aosoa, simd_for_each_range_checked )
{
    ParticleSet set( mixed_schema(), 4, 10 );
    auto noop = []( std::size_t, std::size_t ) {};
    EXPECT_THROW( simd_for_each( set, 0, 11, noop ), std::out_of_range );
    EXPECT_THROW( simd_for_each( set, 5, 4, noop ), std::out_of_range );
}

TEST( aosoa, sequential_sum_is_layout_independent )
{
    ParticleSet ref( mixed_schema(), 1, 777 );
    fill_random( ref, 99 );
    auto sum_of = []( const ParticleSet& s ) {
        auto m = s.slice<double>( "m" );
        double acc = 0.0;
        simd_for_each( s, [&]( std::size_t st, std::size_t a ) {
            acc += m.access( st, a ) * 1.000001;
        } );
        return acc;
    };
    const double expect = sum_of( ref );
    for ( std::size_t V : { 4u, 8u, 16u, 1000u } )
    {
        ParticleSet s( mixed_schema(), V, 777 );
        deep_copy( s, ref );
        EXPECT_EQ( sum_of( s ), expect ) << "V=" << V;
    }
}
