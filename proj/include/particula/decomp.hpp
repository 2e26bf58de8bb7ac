#ifndef PARTICULA_DECOMP_HPP
#define PARTICULA_DECOMP_HPP

#include <particula/aosoa.hpp>
#include <particula/error.hpp>
#include <particula/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
// Message passing between simulated ranks.
//---------------------------------------------------------------------------//

struct Message
{
    int source = 0;
    std::vector<std::byte> payload;
};

template <class T>
void append_bytes( std::vector<std::byte>& out, const T& value )
{
    static_assert( std::is_trivially_copyable_v<T> );
    const auto start = out.size();
    out.resize( start + sizeof( T ) );
    std::memcpy( out.data() + start, &value, sizeof( T ) );
}

template <class T>
T read_bytes( const std::byte*& in )
{
    T value;
    std::memcpy( &value, in, sizeof( T ) );
    in += sizeof( T );
    return value;
}

//---------------------------------------------------------------------------//
/*!
  \brief In-process set of ranks with a Cartesian block decomposition of a
  global box and one mailbox per rank.

  Rank ids are row-major in the rank coordinates (z fastest). Receives return
  messages in ascending source order; messages from one source keep their
  send order.
*/
class DomainFabric
{
  public:
    DomainFabric() = default;

    DomainFabric( const Box& global, const Index3& rank_dims,
                  const Periodic& periodic )
        : _global( global )
        , _dims( rank_dims )
        , _periodic( periodic )
    {
        for ( int d = 0; d < 3; ++d )
            if ( rank_dims[d] < 1 )
                throw std::invalid_argument( "decompose: rank dims must be >= 1" );
        if ( global.empty() )
            throw std::invalid_argument( "decompose: empty global box" );
        _mailbox.resize( size() );
    }

    int size() const { return _dims[0] * _dims[1] * _dims[2]; }
    const Index3& dims() const { return _dims; }
    const Box& global_box() const { return _global; }
    const Periodic& periodic() const { return _periodic; }

    int rank_of( const Index3& c ) const
    {
        return ( c[0] * _dims[1] + c[1] ) * _dims[2] + c[2];
    }

    Index3 coords_of( int rank ) const
    {
        return { rank / ( _dims[1] * _dims[2] ), ( rank / _dims[2] ) % _dims[1],
                 rank % _dims[2] };
    }

    //! Lower edge of block c along axis d (c may equal dims[d]).
    double block_edge( int d, int c ) const
    {
        if ( c == _dims[d] )
            return _global.hi[d];
        return _global.lo[d] + _global.length( d ) * c / _dims[d];
    }

    Box local_box( int rank ) const
    {
        const auto c = coords_of( rank );
        Box b;
        for ( int d = 0; d < 3; ++d )
        {
            b.lo[d] = block_edge( d, c[d] );
            b.hi[d] = block_edge( d, c[d] + 1 );
        }
        return b;
    }

    //! Block coordinate owning x along axis d; x must be inside the box or on
    //! the upper face.
    int block_of( int d, double x ) const
    {
        int c = static_cast<int>(
            std::floor( ( x - _global.lo[d] ) / _global.length( d ) * _dims[d] ) );
        c = std::clamp( c, 0, _dims[d] - 1 );
        // Agree exactly with block_edge() rounding.
        while ( c > 0 && x < block_edge( d, c ) )
            --c;
        while ( c + 1 < _dims[d] && x >= block_edge( d, c + 1 ) )
            ++c;
        return c;
    }

    //! Wrap periodic axes into the global box; throws for a coordinate
    //! outside a non-periodic axis (the upper face is accepted).
    Vec3 canonical_position( const Vec3& x ) const
    {
        Vec3 y = x;
        for ( int d = 0; d < 3; ++d )
        {
            if ( !std::isfinite( x[d] ) )
                throw InvariantViolation( "non-finite particle position" );
            if ( _periodic[d] )
                y[d] = wrap_coordinate( x[d], _global.lo[d], _global.length( d ) );
            else if ( x[d] < _global.lo[d] || x[d] > _global.hi[d] )
                throw std::out_of_range( "particle outside non-periodic global box" );
        }
        return y;
    }

    int owner_of( const Vec3& x ) const
    {
        return rank_of( { block_of( 0, x[0] ), block_of( 1, x[1] ),
                          block_of( 2, x[2] ) } );
    }

    void send( int source, int dest, std::vector<std::byte> payload )
    {
        _messages++;
        _bytes += payload.size();
        _mailbox.at( dest ).push_back( { source, std::move( payload ) } );
    }

    std::vector<Message> receive( int dest )
    {
        auto out = std::move( _mailbox.at( dest ) );
        _mailbox[dest].clear();
        std::stable_sort( out.begin(), out.end(),
                          []( const Message& a, const Message& b ) {
                              return a.source < b.source;
                          } );
        return out;
    }

    //! Incremented whenever particle residency changes.
    std::uint64_t epoch() const { return _epoch; }
    void advance_epoch() { ++_epoch; }

    std::size_t messages_sent() const { return _messages; }
    std::size_t bytes_sent() const { return _bytes; }

  private:
    Box _global;
    Index3 _dims{ 1, 1, 1 };
    Periodic _periodic{ true, true, true };
    std::vector<std::vector<Message>> _mailbox;
    std::uint64_t _epoch = 0;
    std::size_t _messages = 0;
    std::size_t _bytes = 0;
};

inline DomainFabric decompose( const Box& global, const Index3& rank_dims,
                               const Periodic& periodic )
{
    return DomainFabric( global, rank_dims, periodic );
}

//---------------------------------------------------------------------------//
/*!
  \brief Particles held by one rank: owned tuples first, then ghosts.
*/
struct LocalParticles
{
    ParticleSet particles;
    std::size_t owned = 0;

    std::size_t ghosts() const { return particles.size() - owned; }
};

using RankParticles = std::vector<LocalParticles>;

//! Empty per-rank containers with a common schema and layout.
inline RankParticles make_rank_particles( const DomainFabric& fabric,
                                          const FieldSchema& schema,
                                          std::size_t vector_length )
{
    RankParticles out( fabric.size() );
    for ( auto& r : out )
        r.particles = ParticleSet( schema, vector_length, 0 );
    return out;
}

//---------------------------------------------------------------------------//
/*!
  \brief Move every particle to the rank whose half-open box contains it.

  Ghosts are discarded first. Periodic coordinates are wrapped into the
  global box. Survivors keep their relative order; arrivals are appended in
  ascending source rank, then source index.
*/
inline void migrate( DomainFabric& fabric, RankParticles& ranks,
                     const std::string& position_field = "x" )
{
    if ( static_cast<int>( ranks.size() ) != fabric.size() )
        throw std::invalid_argument( "migrate: rank count mismatch" );

    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        local.particles.resize( local.owned );
        auto x = local.particles.slice<double>( position_field );
        std::vector<std::vector<std::byte>> outbox( fabric.size() );
        std::size_t keep = 0;
        for ( std::size_t i = 0; i < local.owned; ++i )
        {
            const Vec3 p = fabric.canonical_position( { x( i, 0 ), x( i, 1 ), x( i, 2 ) } );
            for ( int d = 0; d < 3; ++d )
                x( i, d ) = p[d];
            const int owner = fabric.owner_of( p );
            if ( owner == r )
            {
                if ( keep != i )
                    local.particles.copy_tuple( keep, local.particles, i );
                ++keep;
            }
            else
                local.particles.pack( i, outbox[owner] );
        }
        local.particles.resize( keep );
        local.owned = keep;
        for ( int dest = 0; dest < fabric.size(); ++dest )
            if ( !outbox[dest].empty() )
                fabric.send( r, dest, std::move( outbox[dest] ) );
    }

    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        for ( const auto& msg : fabric.receive( r ) )
        {
            const std::size_t count = msg.payload.size() / local.particles.tuple_bytes();
            const std::byte* p = msg.payload.data();
            const std::size_t start = local.particles.size();
            local.particles.resize( start + count );
            for ( std::size_t k = 0; k < count; ++k )
                p += local.particles.unpack( start + k, p );
        }
        local.owned = local.particles.size();
    }
    fabric.advance_epoch();
}

//---------------------------------------------------------------------------//
// Halo
//---------------------------------------------------------------------------//

struct HaloExport
{
    std::size_t local = 0;
    int dest = 0;
    //! Periodic image in units of the global box lengths.
    Index3 image{ 0, 0, 0 };

    bool operator==( const HaloExport& ) const = default;
};

/*!
  \brief Ghost communication pattern.

  Particle i of rank r is exported to rank r' with image s iff the distance
  from x_i + s*L to the box of r' is below the halo width, excluding the
  trivial (r, s = 0) case. Each (particle, destination, image) appears at
  most once. Ghost slots on a rank are ordered by source rank, then by the
  source's export order.
*/
struct HaloPlan
{
    double width = 0.0;
    Vec3 box_lengths{};
    std::string position_field = "x";
    std::vector<std::vector<HaloExport>> exports;
    std::vector<std::size_t> imports;
    std::vector<std::size_t> owned_at_build;
    std::uint64_t epoch = 0;
};

namespace detail
{
struct AxisOption
{
    int coord;
    int image;
};

// Candidate (destination block, image) options along one axis for a
// coordinate inside block c.
inline void axis_options( const DomainFabric& fabric, int d, int c, double x,
                          double w, std::vector<AxisOption>& out )
{
    out.clear();
    const int n = fabric.dims()[d];
    const bool periodic = fabric.periodic()[d];
    out.push_back( { c, 0 } );
    if ( x - fabric.block_edge( d, c ) < w )
    {
        if ( c > 0 )
            out.push_back( { c - 1, 0 } );
        else if ( periodic )
            out.push_back( { n - 1, 1 } );
    }
    if ( fabric.block_edge( d, c + 1 ) - x < w )
    {
        if ( c + 1 < n )
            out.push_back( { c + 1, 0 } );
        else if ( periodic )
            out.push_back( { 0, -1 } );
    }
}
} // namespace detail

inline HaloPlan build_halo( const DomainFabric& fabric, const RankParticles& ranks,
                            double width, const std::string& position_field = "x" )
{
    if ( !( width > 0.0 ) )
        throw std::invalid_argument( "build_halo: width must be positive" );
    for ( int r = 0; r < fabric.size(); ++r )
    {
        const Box b = fabric.local_box( r );
        for ( int d = 0; d < 3; ++d )
            if ( width > b.length( d ) )
                throw std::invalid_argument(
                    "build_halo: width exceeds a local box edge" );
    }

    HaloPlan plan;
    plan.width = width;
    plan.box_lengths = fabric.global_box().lengths();
    plan.position_field = position_field;
    plan.exports.resize( fabric.size() );
    plan.imports.assign( fabric.size(), 0 );
    plan.owned_at_build.resize( fabric.size() );
    plan.epoch = fabric.epoch();

    const double w2 = width * width;
    std::vector<detail::AxisOption> opts[3];
    for ( int r = 0; r < fabric.size(); ++r )
    {
        const auto& local = ranks[r];
        plan.owned_at_build[r] = local.owned;
        const auto x = local.particles.slice<double>( position_field );
        for ( std::size_t i = 0; i < local.owned; ++i )
        {
            const Vec3 p{ x( i, 0 ), x( i, 1 ), x( i, 2 ) };
            for ( int d = 0; d < 3; ++d )
                detail::axis_options( fabric, d, fabric.block_of( d, p[d] ), p[d],
                                      width, opts[d] );
            for ( auto ox : opts[0] )
                for ( auto oy : opts[1] )
                    for ( auto oz : opts[2] )
                    {
                        const Index3 image{ ox.image, oy.image, oz.image };
                        const int dest = fabric.rank_of( { ox.coord, oy.coord, oz.coord } );
                        if ( dest == r && image == Index3{ 0, 0, 0 } )
                            continue;
                        Vec3 q;
                        for ( int d = 0; d < 3; ++d )
                            q[d] = p[d] + image[d] * plan.box_lengths[d];
                        if ( distance2_to_box( q, fabric.local_box( dest ) ) < w2 )
                        {
                            plan.exports[r].push_back( { i, dest, image } );
                            plan.imports[dest]++;
                        }
                    }
        }
    }
    return plan;
}

namespace detail
{
inline void check_plan( const DomainFabric& fabric, const HaloPlan& plan,
                        const RankParticles& ranks )
{
    if ( plan.epoch != fabric.epoch() ||
         static_cast<int>( plan.exports.size() ) != fabric.size() )
        throw InvariantViolation( "halo plan is stale: residency changed" );
    for ( int r = 0; r < fabric.size(); ++r )
        if ( ranks[r].owned != plan.owned_at_build[r] )
            throw InvariantViolation( "halo plan is stale: owned count changed" );
}

struct FieldRef
{
    std::size_t index;
    ScalarKind kind;
    std::size_t components;
    bool is_position;
};

inline std::vector<FieldRef> resolve_fields( const FieldSchema& schema,
                                             const std::vector<std::string>& names,
                                             const std::string& position_field )
{
    std::vector<FieldRef> out;
    for ( const auto& n : names )
    {
        const auto f = schema.index_of( n );
        out.push_back( { f, schema[f].kind, schema[f].components(),
                         n == position_field } );
    }
    return out;
}
} // namespace detail

/*!
  \brief Copy the listed fields of exported particles into ghost slots.

  Ghost positions are shifted by the recorded periodic image. Ghost slots are
  (re)allocated after the owned particles when the count differs.
*/
inline void halo_gather( DomainFabric& fabric, const HaloPlan& plan,
                         RankParticles& ranks,
                         const std::vector<std::string>& fields )
{
    detail::check_plan( fabric, plan, ranks );
    const auto refs = detail::resolve_fields( ranks[0].particles.schema(), fields,
                                              plan.position_field );

    for ( int r = 0; r < fabric.size(); ++r )
    {
        const auto& set = ranks[r].particles;
        std::vector<std::vector<std::byte>> outbox( fabric.size() );
        for ( const auto& e : plan.exports[r] )
        {
            auto& buf = outbox[e.dest];
            for ( const auto& f : refs )
            {
                const auto& name = set.schema()[f.index].name;
                if ( f.kind == ScalarKind::Float64 )
                {
                    auto v = set.slice<double>( name );
                    for ( std::size_t c = 0; c < f.components; ++c )
                    {
                        double value = v( e.local, c );
                        if ( f.is_position && c < 3 && e.image[c] != 0 )
                            value = value + e.image[c] * plan.box_lengths[c];
                        append_bytes( buf, value );
                    }
                }
                else
                {
                    auto v = set.slice<std::int64_t>( name );
                    for ( std::size_t c = 0; c < f.components; ++c )
                        append_bytes( buf, v( e.local, c ) );
                }
            }
        }
        for ( int dest = 0; dest < fabric.size(); ++dest )
            if ( !outbox[dest].empty() )
                fabric.send( r, dest, std::move( outbox[dest] ) );
    }

    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        const std::size_t total = local.owned + plan.imports[r];
        if ( local.particles.size() != total )
            local.particles.resize( total );
        std::size_t slot = local.owned;
        for ( const auto& msg : fabric.receive( r ) )
        {
            const std::byte* p = msg.payload.data();
            const std::byte* end = p + msg.payload.size();
            while ( p < end )
            {
                for ( const auto& f : refs )
                {
                    const auto& name = local.particles.schema()[f.index].name;
                    if ( f.kind == ScalarKind::Float64 )
                    {
                        auto v = local.particles.slice<double>( name );
                        for ( std::size_t c = 0; c < f.components; ++c )
                            v( slot, c ) = read_bytes<double>( p );
                    }
                    else
                    {
                        auto v = local.particles.slice<std::int64_t>( name );
                        for ( std::size_t c = 0; c < f.components; ++c )
                            v( slot, c ) = read_bytes<std::int64_t>( p );
                    }
                }
                ++slot;
            }
        }
        if ( slot != total )
            throw InvariantViolation( "halo_gather: ghost count mismatch" );
    }
}

/*!
  \brief Add ghost values of the listed float fields back onto their owners
  and zero the ghost values.

  Owners accumulate contributions in ascending ghost-holder rank order, then
  export order, so the sums are reproducible.
*/
inline void halo_scatter( DomainFabric& fabric, const HaloPlan& plan,
                          RankParticles& ranks,
                          const std::vector<std::string>& fields )
{
    detail::check_plan( fabric, plan, ranks );
    const auto refs = detail::resolve_fields( ranks[0].particles.schema(), fields,
                                              plan.position_field );
    for ( const auto& f : refs )
        if ( f.kind != ScalarKind::Float64 )
            throw std::invalid_argument( "halo_scatter: only float fields can be summed" );

    // Ghost slots on each rank, grouped by source in ascending order.
    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        if ( local.ghosts() != plan.imports[r] )
            throw InvariantViolation( "halo_scatter: ghosts not gathered" );
    }
    std::vector<std::vector<std::size_t>> per_source_counts(
        fabric.size(), std::vector<std::size_t>( fabric.size(), 0 ) );
    for ( int src = 0; src < fabric.size(); ++src )
        for ( const auto& e : plan.exports[src] )
            per_source_counts[e.dest][src]++;

    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        std::size_t slot = local.owned;
        for ( int src = 0; src < fabric.size(); ++src )
        {
            const std::size_t count = per_source_counts[r][src];
            if ( count == 0 )
                continue;
            std::vector<std::byte> buf;
            for ( std::size_t k = 0; k < count; ++k, ++slot )
                for ( const auto& f : refs )
                {
                    auto v = local.particles.slice<double>(
                        local.particles.schema()[f.index].name );
                    for ( std::size_t c = 0; c < f.components; ++c )
                    {
                        append_bytes( buf, v( slot, c ) );
                        v( slot, c ) = 0.0;
                    }
                }
            fabric.send( r, src, std::move( buf ) );
        }
    }

    for ( int r = 0; r < fabric.size(); ++r )
    {
        auto& local = ranks[r];
        for ( const auto& msg : fabric.receive( r ) )
        {
            const std::byte* p = msg.payload.data();
            for ( const auto& e : plan.exports[r] )
            {
                if ( e.dest != msg.source )
                    continue;
                for ( const auto& f : refs )
                {
                    auto v = local.particles.slice<double>(
                        local.particles.schema()[f.index].name );
                    for ( std::size_t c = 0; c < f.components; ++c )
                        v( e.local, c ) += read_bytes<double>( p );
                }
            }
        }
    }
}

} // namespace particula

#endif // PARTICULA_DECOMP_HPP
