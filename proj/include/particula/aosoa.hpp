#ifndef PARTICULA_AOSOA_HPP
#define PARTICULA_AOSOA_HPP

#include <particula/error.hpp>
#include <particula/execution.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
// Schema
//---------------------------------------------------------------------------//

enum class ScalarKind
{
    Float64,
    Int64
};

//! One member of a particle tuple: a named tensor of a single scalar kind.
struct FieldSpec
{
    std::string name;
    ScalarKind kind = ScalarKind::Float64;
    //! Tensor dimensions; empty for a scalar, {3} for a vector, {3,3} ...
    std::vector<std::size_t> extent;

    std::size_t components() const
    {
        return std::accumulate( extent.begin(), extent.end(), std::size_t{ 1 },
                                std::multiplies<>() );
    }

    bool operator==( const FieldSpec& ) const = default;
};

//! Ordered list of particle fields. Names are unique, extents are >= 1.
class FieldSchema
{
  public:
    FieldSchema() = default;

    FieldSchema( std::initializer_list<FieldSpec> fields )
        : _fields( fields )
    {
        validate();
    }

    explicit FieldSchema( std::vector<FieldSpec> fields )
        : _fields( std::move( fields ) )
    {
        validate();
    }

    const std::vector<FieldSpec>& fields() const { return _fields; }
    std::size_t size() const { return _fields.size(); }
    const FieldSpec& operator[]( std::size_t f ) const { return _fields[f]; }

    bool contains( const std::string& name ) const
    {
        return find( name ) < _fields.size();
    }

    std::size_t index_of( const std::string& name ) const
    {
        auto f = find( name );
        if ( f == _fields.size() )
            throw std::out_of_range( "unknown particle field: " + name );
        return f;
    }

    bool operator==( const FieldSchema& ) const = default;

  private:
    std::size_t find( const std::string& name ) const
    {
        for ( std::size_t f = 0; f < _fields.size(); ++f )
            if ( _fields[f].name == name )
                return f;
        return _fields.size();
    }

    void validate() const
    {
        for ( std::size_t f = 0; f < _fields.size(); ++f )
        {
            if ( _fields[f].name.empty() )
                throw std::invalid_argument( "particle field with empty name" );
            for ( auto e : _fields[f].extent )
                if ( e == 0 )
                    throw std::invalid_argument( "zero extent in field " +
                                                 _fields[f].name );
            for ( std::size_t g = 0; g < f; ++g )
                if ( _fields[g].name == _fields[f].name )
                    throw std::invalid_argument( "duplicate particle field: " +
                                                 _fields[f].name );
        }
    }

    std::vector<FieldSpec> _fields;
};

template <class T>
constexpr ScalarKind scalar_kind_of()
{
    using U = std::remove_const_t<T>;
    static_assert( std::is_same_v<U, double> ||
                       std::is_same_v<U, std::int64_t>,
                   "particle fields hold double or int64_t" );
    return std::is_same_v<U, double> ? ScalarKind::Float64 : ScalarKind::Int64;
}

//---------------------------------------------------------------------------//
/*!
  \brief Strided view of one field of a ParticleSet.

  Element (i, c) lives at struct s = i / V, lane a = i % V, at offset
  s * struct_stride + (first_component + c) * V + a within the storage of
  the field's scalar kind. The view aliases the set; it is invalidated by
  any resize of the owning set. Tensor extents are right-aligned in a
  3-slot array, so a [3,3] field has extents {1,3,3}.
*/
template <class T>
class FieldView
{
  public:
    using value_type = T;

    FieldView() = default;

    FieldView( T* data, std::size_t size, std::size_t vector_length,
               std::size_t struct_stride, std::size_t first_component,
               std::array<std::size_t, 3> extent, std::size_t rank )
        : _data( data )
        , _size( size )
        , _vector_length( vector_length )
        , _struct_stride( struct_stride )
        , _first( first_component )
        , _extent( extent )
        , _rank( rank )
        , _lane_mask( std::has_single_bit( vector_length ) ? vector_length - 1 : 0 )
        , _lane_shift( std::has_single_bit( vector_length )
                           ? static_cast<unsigned>( std::countr_zero( vector_length ) )
                           : 0u )
    {
    }

    //! Const view of a mutable view.
    template <class U>
        requires std::is_same_v<T, const U>
    FieldView( const FieldView<U>& other )
        : FieldView( other.data(), other.size(), other.vector_length(),
                     other.struct_stride(), other.first_component(),
                     other.extents(), other.rank() )
    {
    }

    std::size_t size() const { return _size; }
    std::size_t vector_length() const { return _vector_length; }
    std::size_t struct_stride() const { return _struct_stride; }
    std::size_t first_component() const { return _first; }
    std::array<std::size_t, 3> extents() const { return _extent; }
    std::size_t rank() const { return _rank; }
    T* data() const { return _data; }

    std::size_t components() const
    {
        return _extent[0] * _extent[1] * _extent[2];
    }

    //! Two-level access by struct and lane.
    T& access( std::size_t s, std::size_t a, std::size_t c = 0 ) const
    {
        return _data[s * _struct_stride + ( _first + c ) * _vector_length + a];
    }

    T& operator()( std::size_t i ) const { return ( *this )( i, 0 ); }

    T& operator()( std::size_t i, std::size_t c ) const
    {
        if ( _lane_mask != 0 || _vector_length == 1 )
            return access( i >> _lane_shift, i & _lane_mask, c );
        return access( i / _vector_length, i % _vector_length, c );
    }

    T& operator()( std::size_t i, std::size_t c0, std::size_t c1 ) const
    {
        return ( *this )( i, c0 * _extent[2] + c1 );
    }

    T& operator()( std::size_t i, std::size_t c0, std::size_t c1,
                   std::size_t c2 ) const
    {
        return ( *this )( i, ( c0 * _extent[1] + c1 ) * _extent[2] + c2 );
    }

    //! Address of element (i, c); used for aliasing checks.
    const T* address( std::size_t i, std::size_t c = 0 ) const
    {
        return &( *this )( i, c );
    }

  private:
    T* _data = nullptr;
    std::size_t _size = 0;
    std::size_t _vector_length = 1;
    std::size_t _struct_stride = 0;
    std::size_t _first = 0;
    std::array<std::size_t, 3> _extent{ 1, 1, 1 };
    std::size_t _rank = 0;
    //! Shift/mask lane split for power-of-two V.
    std::size_t _lane_mask = 0;
    unsigned _lane_shift = 0;
};

//---------------------------------------------------------------------------//
/*!
  \brief Particle container with Array-of-Structs-of-Arrays layout.

  Particles are grouped into structs of V lanes. Inside a struct every field
  component is stored as V contiguous values. V = 1 is an array of structs;
  V >= size is a struct of arrays. Float and integer fields are kept in two
  buffers that share the same struct/lane geometry.

  The vector length is a run-time parameter so that a single binary can sweep
  layouts.
*/
class ParticleSet
{
  public:
    static constexpr std::size_t default_vector_length = 16;

    ParticleSet() = default;

    ParticleSet( FieldSchema schema,
                 std::size_t vector_length = default_vector_length,
                 std::size_t n = 0 )
        : _schema( std::move( schema ) )
        , _vector_length( vector_length )
    {
        if ( vector_length == 0 )
            throw std::invalid_argument( "vector length must be positive" );
        _offset.resize( _schema.size() );
        for ( std::size_t f = 0; f < _schema.size(); ++f )
        {
            auto& count = _schema[f].kind == ScalarKind::Float64 ? _f64_components
                                                                 : _i64_components;
            _offset[f] = count;
            count += _schema[f].components();
        }
        resize( n );
    }

    const FieldSchema& schema() const { return _schema; }
    std::size_t size() const { return _size; }
    bool empty() const { return _size == 0; }
    std::size_t vector_length() const { return _vector_length; }
    std::size_t num_soa() const
    {
        return ( _size + _vector_length - 1 ) / _vector_length;
    }
    std::size_t capacity() const { return num_soa() * _vector_length; }

    //! Struct index of logical particle i.
    std::size_t struct_index( std::size_t i ) const { return i / _vector_length; }
    //! Lane index of logical particle i.
    std::size_t lane_index( std::size_t i ) const { return i % _vector_length; }
    //! Number of occupied lanes in struct s.
    std::size_t array_size( std::size_t s ) const
    {
        return std::min( _vector_length, _size - s * _vector_length );
    }

    //! Resize preserving the first min(n, size()) tuples. New tuples and
    //! padding lanes are zero.
    void resize( std::size_t n )
    {
        const std::size_t old = _size;
        _size = n;
        const std::size_t structs = num_soa();
        _f64.resize( structs * _f64_components * _vector_length, 0.0 );
        _i64.resize( structs * _i64_components * _vector_length, 0 );
        if ( n < old )
            zero_padding();
    }

    void clear() { resize( 0 ); }

    template <class T>
    FieldView<T> slice( const std::string& name )
    {
        return make_view<T>( name, *this );
    }

    template <class T>
    FieldView<const T> slice( const std::string& name ) const
    {
        return make_view<const T>( name, *this );
    }

    //! Bytes needed to serialize one tuple.
    std::size_t tuple_bytes() const
    {
        return 8 * ( _f64_components + _i64_components );
    }

    //! Append tuple i to a byte buffer (field order, component order).
    void pack( std::size_t i, std::vector<std::byte>& out ) const
    {
        const auto s = struct_index( i );
        const auto a = lane_index( i );
        const auto start = out.size();
        out.resize( start + tuple_bytes() );
        std::byte* p = out.data() + start;
        for ( std::size_t c = 0; c < _f64_components; ++c, p += 8 )
            std::memcpy( p, &_f64[f64_index( s, a, c )], 8 );
        for ( std::size_t c = 0; c < _i64_components; ++c, p += 8 )
            std::memcpy( p, &_i64[i64_index( s, a, c )], 8 );
    }

    //! Overwrite tuple i from bytes written by pack(). Returns bytes read.
    std::size_t unpack( std::size_t i, const std::byte* in )
    {
        const auto s = struct_index( i );
        const auto a = lane_index( i );
        const std::byte* p = in;
        for ( std::size_t c = 0; c < _f64_components; ++c, p += 8 )
            std::memcpy( &_f64[f64_index( s, a, c )], p, 8 );
        for ( std::size_t c = 0; c < _i64_components; ++c, p += 8 )
            std::memcpy( &_i64[i64_index( s, a, c )], p, 8 );
        return tuple_bytes();
    }

    //! Copy tuple src_i of src (same schema, any V) into tuple dst_i.
    void copy_tuple( std::size_t dst_i, const ParticleSet& src,
                     std::size_t src_i )
    {
        const auto ds = struct_index( dst_i ), da = lane_index( dst_i );
        const auto ss = src.struct_index( src_i ), sa = src.lane_index( src_i );
        for ( std::size_t c = 0; c < _f64_components; ++c )
            _f64[f64_index( ds, da, c )] = src._f64[src.f64_index( ss, sa, c )];
        for ( std::size_t c = 0; c < _i64_components; ++c )
            _i64[i64_index( ds, da, c )] = src._i64[src.i64_index( ss, sa, c )];
    }

    //! Raw storage, including padding lanes. Exposed for layout tests.
    std::span<const double> float_storage() const { return _f64; }
    std::span<const std::int64_t> int_storage() const { return _i64; }

  private:
    template <class T, class Set>
    static FieldView<T> make_view( const std::string& name, Set& set )
    {
        const auto f = set._schema.index_of( name );
        const auto& spec = set._schema[f];
        if ( spec.kind != scalar_kind_of<T>() )
            throw std::invalid_argument( "field " + name +
                                         " has a different scalar kind" );
        if ( spec.extent.size() > 3 )
            throw std::invalid_argument( "field " + name +
                                         " has more than 3 tensor dims" );
        std::array<std::size_t, 3> ext{ 1, 1, 1 };
        for ( std::size_t d = 0; d < spec.extent.size(); ++d )
            ext[3 - spec.extent.size() + d] = spec.extent[d];
        constexpr bool is_float = scalar_kind_of<T>() == ScalarKind::Float64;
        auto* base = [&] {
            if constexpr ( is_float )
                return set._f64.data();
            else
                return set._i64.data();
        }();
        const std::size_t comps =
            is_float ? set._f64_components : set._i64_components;
        return FieldView<T>( base, set._size, set._vector_length,
                             comps * set._vector_length, set._offset[f], ext,
                             spec.extent.size() );
    }

    std::size_t f64_index( std::size_t s, std::size_t a, std::size_t c ) const
    {
        return ( s * _f64_components + c ) * _vector_length + a;
    }
    std::size_t i64_index( std::size_t s, std::size_t a, std::size_t c ) const
    {
        return ( s * _i64_components + c ) * _vector_length + a;
    }

    void zero_padding()
    {
        if ( _size % _vector_length == 0 )
            return;
        const auto s = num_soa() - 1;
        for ( auto a = _size % _vector_length; a < _vector_length; ++a )
        {
            for ( std::size_t c = 0; c < _f64_components; ++c )
                _f64[f64_index( s, a, c )] = 0.0;
            for ( std::size_t c = 0; c < _i64_components; ++c )
                _i64[i64_index( s, a, c )] = 0;
        }
    }

    FieldSchema _schema;
    std::size_t _vector_length = default_vector_length;
    std::size_t _size = 0;
    std::vector<std::size_t> _offset;
    std::size_t _f64_components = 0;
    std::size_t _i64_components = 0;
    std::vector<double> _f64;
    std::vector<std::int64_t> _i64;
};

//---------------------------------------------------------------------------//
// Copy every tuple of src into dst. Layouts (vector lengths) may differ.
inline void deep_copy( ParticleSet& dst, const ParticleSet& src )
{
    if ( &dst == &src )
        return;
    if ( !( dst.schema() == src.schema() ) )
        throw std::invalid_argument( "deep_copy: schema mismatch" );
    if ( dst.size() != src.size() )
        throw std::invalid_argument( "deep_copy: size mismatch" );
    for ( std::size_t i = 0; i < src.size(); ++i )
        dst.copy_tuple( i, src, i );
}

//---------------------------------------------------------------------------//
/*!
  \brief Vectorized loop over the logical range [begin, end).

  The kernel receives (struct, lane). Whole structs are the unit of work in
  parallel mode; padding lanes are never visited. In serial mode the visit
  order is ascending logical index.
*/
template <class Kernel>
void simd_for_each( const ParticleSet& set, std::size_t begin, std::size_t end,
                    Kernel&& kernel,
                    ExecutionMode mode = ExecutionMode::Serial )
{
    if ( begin > end || end > set.size() )
        throw std::out_of_range( "simd_for_each: range outside [0, size)" );
    if ( begin == end )
        return;
    const std::size_t V = set.vector_length();
    const std::size_t s_begin = begin / V;
    const std::size_t s_end = ( end + V - 1 ) / V;
    parallel_for( mode, s_begin, s_end, [&]( std::size_t s ) {
        const std::size_t a_begin = s == s_begin ? begin % V : 0;
        const std::size_t a_end = s * V + V <= end ? V : end - s * V;
        for ( std::size_t a = a_begin; a < a_end; ++a )
            kernel( s, a );
    } );
}

template <class Kernel>
void simd_for_each( const ParticleSet& set, Kernel&& kernel,
                    ExecutionMode mode = ExecutionMode::Serial )
{
    simd_for_each( set, 0, set.size(), std::forward<Kernel>( kernel ), mode );
}

} // namespace particula

#endif // PARTICULA_AOSOA_HPP
