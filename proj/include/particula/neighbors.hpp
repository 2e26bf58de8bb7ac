#ifndef PARTICULA_NEIGHBORS_HPP
#define PARTICULA_NEIGHBORS_HPP

#include <particula/aosoa.hpp>
#include <particula/binning.hpp>
#include <particula/execution.hpp>
#include <particula/geometry.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace particula
{

enum class ListLayout
{
    Dense,
    Compressed
};

enum class PairConvention
{
    //! Each unordered pair stored once, under the smaller index.
    Half,
    //! j in N(i) iff i in N(j).
    Full
};

using NeighborIndex = std::uint32_t;

//---------------------------------------------------------------------------//
/*!
  \brief Verlet neighbor list.

  Dense stores an n x capacity table padded past each particle's count.
  Compressed stores all neighbors back to back with prefix offsets. Only the
  first num_rows() particles own a list; any particle may appear as a
  neighbor.
*/
class VerletList
{
  public:
    VerletList() = default;

    ListLayout layout() const { return _layout; }
    PairConvention convention() const { return _convention; }
    double cutoff() const { return _cutoff; }
    std::size_t num_rows() const { return _counts.size(); }
    std::size_t dense_capacity() const { return _capacity; }

    std::size_t count( std::size_t i ) const { return _counts[i]; }

    std::size_t total() const
    {
        std::size_t t = 0;
        for ( auto c : _counts )
            t += c;
        return t;
    }

    std::size_t max_count() const
    {
        std::size_t m = 0;
        for ( auto c : _counts )
            m = std::max<std::size_t>( m, c );
        return m;
    }

    std::size_t neighbor( std::size_t i, std::size_t k ) const
    {
        return _layout == ListLayout::Dense ? _table[i * _capacity + k]
                                            : _table[_offsets[i] + k];
    }

    //! Neighbors of i in stored order.
    std::span<const NeighborIndex> row( std::size_t i ) const
    {
        const std::size_t start =
            _layout == ListLayout::Dense ? i * _capacity : _offsets[i];
        return { _table.data() + start, _counts[i] };
    }

    //! Reorder every row by ascending key of the neighbor, ties by index.
    template <class Key>
    void sort_rows( std::span<const Key> keys )
    {
        for ( std::size_t i = 0; i < num_rows(); ++i )
        {
            const std::size_t start =
                _layout == ListLayout::Dense ? i * _capacity : _offsets[i];
            auto* first = _table.data() + start;
            std::sort( first, first + _counts[i],
                       [&]( NeighborIndex a, NeighborIndex b ) {
                           return keys[a] < keys[b] ||
                                  ( keys[a] == keys[b] && a < b );
                       } );
        }
    }

  private:
    friend class VerletBuilder;

    ListLayout _layout = ListLayout::Compressed;
    PairConvention _convention = PairConvention::Full;
    double _cutoff = 0.0;
    std::size_t _capacity = 0;
    std::vector<NeighborIndex> _counts;
    std::vector<std::size_t> _offsets;
    std::vector<NeighborIndex> _table;
};

struct NeighborOptions
{
    ListLayout layout = ListLayout::Compressed;
    PairConvention convention = PairConvention::Full;
    //! Cell edge over cutoff; must be >= 1.
    double cell_ratio = 1.0;
    //! Initial Dense row capacity; grows on overflow.
    std::size_t dense_capacity = 32;
    //! Particles that own a list (default: all).
    std::optional<std::size_t> num_rows;
    ExecutionMode mode = ExecutionMode::Serial;
};

//---------------------------------------------------------------------------//
class VerletBuilder
{
  public:
    VerletBuilder( FieldView<const double> x, const Box& box,
                   const Periodic& periodic, double cutoff,
                   const NeighborOptions& options )
        : _x( x )
        , _box( box )
        , _periodic( periodic )
        , _cutoff( cutoff )
        , _options( options )
    {
        if ( box.empty() )
            throw std::invalid_argument( "build_verlet: empty box" );
        if ( !( cutoff > 0.0 ) )
            throw std::invalid_argument( "build_verlet: cutoff must be positive" );
        if ( options.cell_ratio < 1.0 )
            throw std::invalid_argument( "build_verlet: cell ratio below 1" );
        for ( int d = 0; d < 3; ++d )
            if ( periodic[d] && cutoff > 0.5 * box.length( d ) )
                throw std::invalid_argument(
                    "build_verlet: cutoff exceeds half the periodic box length" );
        _rows = options.num_rows.value_or( x.size() );
        if ( _rows > x.size() )
            throw std::invalid_argument( "build_verlet: more rows than particles" );

        const double edge = cutoff * options.cell_ratio;
        _bins = detail::bin_positions( x, box, { edge, edge, edge }, false );
        build_stencils();
    }

    VerletList build()
    {
        VerletList list;
        list._layout = _options.layout;
        list._convention = _options.convention;
        list._cutoff = _cutoff;
        list._counts.assign( _rows, 0 );

        if ( _options.layout == ListLayout::Compressed )
        {
            parallel_for( _options.mode, 0, _rows, [&]( std::size_t i ) {
                list._counts[i] = static_cast<NeighborIndex>(
                    visit( i, []( std::size_t, std::size_t ) {} ) );
            } );
            list._offsets.assign( _rows + 1, 0 );
            for ( std::size_t i = 0; i < _rows; ++i )
                list._offsets[i + 1] = list._offsets[i] + list._counts[i];
            list._table.resize( list._offsets[_rows] );
            parallel_for( _options.mode, 0, _rows, [&]( std::size_t i ) {
                auto* out = list._table.data() + list._offsets[i];
                visit( i, [&]( std::size_t k, std::size_t j ) {
                    out[k] = static_cast<NeighborIndex>( j );
                } );
            } );
            return list;
        }

        // Dense: fill with a guessed capacity and rebuild when any row
        // overflows it.
        std::size_t capacity = std::max<std::size_t>( 1, _options.dense_capacity );
        for ( ;; )
        {
            list._capacity = capacity;
            list._table.assign( _rows * capacity, 0 );
            parallel_for( _options.mode, 0, _rows, [&]( std::size_t i ) {
                auto* out = list._table.data() + i * capacity;
                list._counts[i] = static_cast<NeighborIndex>(
                    visit( i, [&]( std::size_t k, std::size_t j ) {
                        if ( k < capacity )
                            out[k] = static_cast<NeighborIndex>( j );
                    } ) );
            } );
            const std::size_t needed = list.max_count();
            if ( needed <= capacity )
                return list;
            capacity = needed;
        }
    }

  private:
    // Calls emit(k, j) for the k-th neighbor j of i; returns the count.
    template <class Emit>
    std::size_t visit( std::size_t i, Emit&& emit ) const
    {
        const Vec3 xi{ _x( i, 0 ), _x( i, 1 ), _x( i, 2 ) };
        const double rc2 = _cutoff * _cutoff;
        const bool half = _options.convention == PairConvention::Half;
        const auto& stencil = _stencils[_bins.cell_of( xi )];
        std::size_t k = 0;
        for ( auto c : stencil )
        {
            for ( auto o = _bins.offsets[c]; o < _bins.offsets[c + 1]; ++o )
            {
                const std::size_t j = _bins.permutation[o];
                if ( j == i || ( half && j < i ) )
                    continue;
                double r2 = 0.0;
                for ( int d = 0; d < 3; ++d )
                {
                    double xj = _x( j, d );
                    if ( _periodic[d] )
                        xj = nearest_image( xi[d], xj, _box.length( d ) );
                    const double dx = xj - xi[d];
                    r2 += dx * dx;
                }
                if ( r2 < rc2 )
                    emit( k++, j );
            }
        }
        return k;
    }

    // Distinct cells within one cell of each cell, ascending linear order.
    void build_stencils()
    {
        const auto& n = _bins.cells;
        _stencils.resize( _bins.num_cells() );
        for ( int cx = 0; cx < n[0]; ++cx )
            for ( int cy = 0; cy < n[1]; ++cy )
                for ( int cz = 0; cz < n[2]; ++cz )
                {
                    auto& s = _stencils[_bins.linear_cell( cx, cy, cz )];
                    for ( int ox = -1; ox <= 1; ++ox )
                        for ( int oy = -1; oy <= 1; ++oy )
                            for ( int oz = -1; oz <= 1; ++oz )
                            {
                                Index3 m{ cx + ox, cy + oy, cz + oz };
                                bool valid = true;
                                for ( int d = 0; d < 3; ++d )
                                {
                                    if ( m[d] >= 0 && m[d] < n[d] )
                                        continue;
                                    if ( _periodic[d] )
                                        m[d] = ( m[d] + n[d] ) % n[d];
                                    else
                                        valid = false;
                                }
                                if ( valid )
                                    s.push_back( _bins.linear_cell( m[0], m[1], m[2] ) );
                            }
                    std::sort( s.begin(), s.end() );
                    s.erase( std::unique( s.begin(), s.end() ), s.end() );
                }
    }

    FieldView<const double> _x;
    Box _box;
    Periodic _periodic;
    double _cutoff;
    NeighborOptions _options;
    std::size_t _rows = 0;
    CellBinning _bins;
    std::vector<std::vector<std::size_t>> _stencils;
};

/*!
  \brief Build a cell-accelerated Verlet list.

  j is a neighbor of i iff i != j and the minimum-image squared distance is
  strictly below cutoff^2. On non-periodic axes positions outside the box are
  binned into the boundary cells.
*/
inline VerletList build_verlet( FieldView<const double> x, const Box& box,
                                const Periodic& periodic, double cutoff,
                                const NeighborOptions& options = {} )
{
    return VerletBuilder( x, box, periodic, cutoff, options ).build();
}

//---------------------------------------------------------------------------//
// Neighbor-parallel loops.
//---------------------------------------------------------------------------//

//! kernel(i, j) for every stored pair with i in [begin, end).
template <class Kernel>
void for_each_neighbor( const VerletList& list, std::size_t begin,
                        std::size_t end, Kernel&& kernel,
                        ExecutionMode mode = ExecutionMode::Serial )
{
    if ( begin > end || end > list.num_rows() )
        throw std::out_of_range( "for_each_neighbor: range outside list" );
    parallel_for( mode, begin, end, [&]( std::size_t i ) {
        for ( auto j : list.row( i ) )
            kernel( i, static_cast<std::size_t>( j ) );
    } );
}

template <class Kernel>
void for_each_neighbor( const VerletList& list, Kernel&& kernel,
                        ExecutionMode mode = ExecutionMode::Serial )
{
    for_each_neighbor( list, 0, list.num_rows(), std::forward<Kernel>( kernel ),
                       mode );
}

//! kernel(i, j, k) for each pair of distinct neighbors j before k of i.
template <class Kernel>
void for_each_neighbor2( const VerletList& list, std::size_t begin,
                         std::size_t end, Kernel&& kernel,
                         ExecutionMode mode = ExecutionMode::Serial )
{
    if ( list.convention() != PairConvention::Full )
        throw std::invalid_argument( "for_each_neighbor2 requires a Full list" );
    if ( begin > end || end > list.num_rows() )
        throw std::out_of_range( "for_each_neighbor2: range outside list" );
    parallel_for( mode, begin, end, [&]( std::size_t i ) {
        auto r = list.row( i );
        for ( std::size_t a = 0; a < r.size(); ++a )
            for ( std::size_t b = a + 1; b < r.size(); ++b )
                kernel( i, static_cast<std::size_t>( r[a] ),
                        static_cast<std::size_t>( r[b] ) );
    } );
}

template <class Kernel>
void for_each_neighbor2( const VerletList& list, Kernel&& kernel,
                         ExecutionMode mode = ExecutionMode::Serial )
{
    for_each_neighbor2( list, 0, list.num_rows(), std::forward<Kernel>( kernel ),
                        mode );
}

} // namespace particula

#endif // PARTICULA_NEIGHBORS_HPP
