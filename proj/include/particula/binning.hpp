#ifndef PARTICULA_BINNING_HPP
#define PARTICULA_BINNING_HPP

#include <particula/aosoa.hpp>
#include <particula/geometry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
/*!
  \brief Reordering of n particles: entry k is the source index of the
  particle that moves to position k.
*/
using Permutation = std::vector<std::size_t>;

inline bool is_bijection( std::span<const std::size_t> p )
{
    std::vector<unsigned char> seen( p.size(), 0 );
    for ( auto src : p )
    {
        if ( src >= p.size() || seen[src] )
            return false;
        seen[src] = 1;
    }
    return true;
}

//---------------------------------------------------------------------------//
// Stable sort by key.
template <class Key>
Permutation bin_by_key( std::span<const Key> keys )
{
    Permutation p( keys.size() );
    std::iota( p.begin(), p.end(), std::size_t{ 0 } );
    std::stable_sort( p.begin(), p.end(), [&]( std::size_t a, std::size_t b ) {
        return keys[a] < keys[b];
    } );
    return p;
}

template <class Key>
Permutation bin_by_key( const std::vector<Key>& keys )
{
    return bin_by_key( std::span<const Key>( keys ) );
}

//---------------------------------------------------------------------------//
/*!
  \brief Uniform cell binning of particle positions.

  After applying `permutation`, the particles of linear cell c occupy the
  index range [offsets[c], offsets[c+1]). Linear cells are row-major with z
  fastest.
*/
struct CellBinning
{
    Index3 cells{ 1, 1, 1 };
    Vec3 cell_size{ 1.0, 1.0, 1.0 };
    Vec3 origin{ 0.0, 0.0, 0.0 };
    std::vector<std::size_t> offsets;
    Permutation permutation;

    std::size_t num_cells() const
    {
        return std::size_t( cells[0] ) * cells[1] * cells[2];
    }

    std::size_t linear_cell( int cx, int cy, int cz ) const
    {
        return ( std::size_t( cx ) * cells[1] + cy ) * cells[2] + cz;
    }

    //! Cell coordinate along axis d, half-open with the top face clamped.
    int cell_coordinate( int d, double x ) const
    {
        int c = static_cast<int>( std::floor( ( x - origin[d] ) / cell_size[d] ) );
        return std::clamp( c, 0, cells[d] - 1 );
    }

    std::size_t cell_of( const Vec3& x ) const
    {
        return linear_cell( cell_coordinate( 0, x[0] ), cell_coordinate( 1, x[1] ),
                            cell_coordinate( 2, x[2] ) );
    }

    std::size_t bin_size( std::size_t c ) const
    {
        return offsets[c + 1] - offsets[c];
    }
};

//! Number of cells of edge >= cell_size that tile a length.
inline int cells_along( double length, double cell_size )
{
    int n = static_cast<int>( std::floor( length / cell_size * ( 1.0 + 1e-12 ) ) );
    return std::max( 1, n );
}

namespace detail
{
inline CellBinning bin_positions( FieldView<const double> x, const Box& box,
                                  const Vec3& cell_size, bool strict )
{
    if ( box.empty() )
        throw std::invalid_argument( "bin_by_position: empty box" );
    CellBinning b;
    b.origin = box.lo;
    for ( int d = 0; d < 3; ++d )
    {
        if ( !( cell_size[d] > 0.0 ) )
            throw std::invalid_argument(
                "bin_by_position: cell size must be positive" );
        b.cells[d] = cells_along( box.length( d ), cell_size[d] );
        b.cell_size[d] = box.length( d ) / b.cells[d];
    }

    const std::size_t n = x.size();
    std::vector<std::size_t> cell( n );
    for ( std::size_t i = 0; i < n; ++i )
    {
        Vec3 p{ x( i, 0 ), x( i, 1 ), x( i, 2 ) };
        if ( strict )
            for ( int d = 0; d < 3; ++d )
                if ( !( p[d] >= box.lo[d] && p[d] <= box.hi[d] ) )
                    throw std::out_of_range( "bin_by_position: particle " +
                                             std::to_string( i ) +
                                             " outside box" );
        cell[i] = b.cell_of( p );
    }

    b.offsets.assign( b.num_cells() + 1, 0 );
    for ( auto c : cell )
        ++b.offsets[c + 1];
    std::partial_sum( b.offsets.begin(), b.offsets.end(), b.offsets.begin() );

    b.permutation.resize( n );
    std::vector<std::size_t> fill( b.offsets.begin(), b.offsets.end() - 1 );
    for ( std::size_t i = 0; i < n; ++i )
        b.permutation[fill[cell[i]]++] = i;
    return b;
}
} // namespace detail

/*!
  \brief Geometric binning by stable counting sort.

  The number of cells per axis is floor(L / cell_size), so the actual cell
  edge is >= the requested size and the cells tile the box exactly. Every
  position must lie in the closed box; the upper face belongs to the top
  cell.
*/
inline CellBinning bin_by_position( FieldView<const double> x, const Box& box,
                                    const Vec3& cell_size )
{
    return detail::bin_positions( x, box, cell_size, true );
}

//---------------------------------------------------------------------------//
// Reorder all fields of a set: new tuple k is old tuple p[k].
inline void permute( ParticleSet& set, std::span<const std::size_t> p )
{
    if ( p.size() != set.size() )
        throw std::invalid_argument( "permute: permutation length mismatch" );
    if ( !is_bijection( p ) )
        throw std::invalid_argument( "permute: not a bijection" );
    ParticleSet out( set.schema(), set.vector_length(), set.size() );
    for ( std::size_t k = 0; k < p.size(); ++k )
        out.copy_tuple( k, set, p[k] );
    set = std::move( out );
}

} // namespace particula

#endif // PARTICULA_BINNING_HPP
