#ifndef PARTICULA_GRID_HPP
#define PARTICULA_GRID_HPP

#include <particula/aosoa.hpp>
#include <particula/execution.hpp>
#include <particula/geometry.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace particula
{

//---------------------------------------------------------------------------//
/*!
  \brief Uniform node-centered grid over a box.

  Periodic axes carry `cells` nodes, the node at hi being the image of the
  node at lo. Non-periodic axes carry `cells + 1`. Nodes are stored
  row-major with z fastest.
*/
class StructuredGrid
{
  public:
    StructuredGrid() = default;

    StructuredGrid( const Box& box, const Index3& cells, const Periodic& periodic )
        : _box( box )
        , _cells( cells )
        , _periodic( periodic )
    {
        for ( int d = 0; d < 3; ++d )
        {
            if ( cells[d] < 1 )
                throw std::invalid_argument( "StructuredGrid: cells must be positive" );
            if ( !( box.length( d ) > 0.0 ) )
                throw std::invalid_argument( "StructuredGrid: empty box" );
            _h[d] = box.length( d ) / cells[d];
        }
    }

    const Box& box() const { return _box; }
    const Index3& cells() const { return _cells; }
    const Periodic& periodic() const { return _periodic; }
    const Vec3& spacing() const { return _h; }
    double spacing( int d ) const { return _h[d]; }
    const Vec3& origin() const { return _box.lo; }

    int nodes( int d ) const { return _periodic[d] ? _cells[d] : _cells[d] + 1; }

    std::size_t num_nodes() const
    {
        return static_cast<std::size_t>( nodes( 0 ) ) * nodes( 1 ) * nodes( 2 );
    }

    std::size_t node_index( int i, int j, int k ) const
    {
        return ( static_cast<std::size_t>( i ) * nodes( 1 ) + j ) * nodes( 2 ) + k;
    }

    Index3 node_coordinate( std::size_t n ) const
    {
        const auto nz = static_cast<std::size_t>( nodes( 2 ) );
        const auto ny = static_cast<std::size_t>( nodes( 1 ) );
        return { static_cast<int>( n / ( ny * nz ) ),
                 static_cast<int>( ( n / nz ) % ny ), static_cast<int>( n % nz ) };
    }

    Vec3 node_position( int i, int j, int k ) const
    {
        return { _box.lo[0] + i * _h[0], _box.lo[1] + j * _h[1],
                 _box.lo[2] + k * _h[2] };
    }

    //! Cell volume.
    double cell_volume() const { return _h[0] * _h[1] * _h[2]; }

  private:
    Box _box;
    Index3 _cells{ 1, 1, 1 };
    Periodic _periodic{ true, true, true };
    Vec3 _h{ 1.0, 1.0, 1.0 };
};

//---------------------------------------------------------------------------//
//! Node field with a fixed number of components per node.
class NodeField
{
  public:
    NodeField() = default;

    NodeField( const StructuredGrid& grid, std::size_t components = 1 )
        : _grid( grid )
        , _components( components )
        , _data( grid.num_nodes() * components, 0.0 )
    {
        if ( components == 0 )
            throw std::invalid_argument( "NodeField: zero components" );
    }

    const StructuredGrid& grid() const { return _grid; }
    std::size_t components() const { return _components; }
    std::size_t num_nodes() const { return _grid.num_nodes(); }

    double& operator()( std::size_t n, std::size_t c = 0 )
    {
        return _data[n * _components + c];
    }
    double operator()( std::size_t n, std::size_t c = 0 ) const
    {
        return _data[n * _components + c];
    }

    std::vector<double>& data() { return _data; }
    const std::vector<double>& data() const { return _data; }

    void fill( double v ) { std::fill( _data.begin(), _data.end(), v ); }

    double sum( std::size_t c = 0 ) const
    {
        double s = 0.0;
        for ( std::size_t n = 0; n < num_nodes(); ++n )
            s += ( *this )( n, c );
        return s;
    }

  private:
    StructuredGrid _grid;
    std::size_t _components = 1;
    std::vector<double> _data;
};

//---------------------------------------------------------------------------//
/*!
  \brief Per-axis B-spline stencil of one point.

  Axis d holds `size[d]` nodes. Weight gradients are in 1/length units. An
  axis with a single periodic node is degenerate: one node of weight 1 and
  gradient 0.
*/
struct SplineStencil
{
    int order = 1;
    Index3 size{ 0, 0, 0 };
    std::array<std::array<int, 4>, 3> node{};
    std::array<std::array<double, 4>, 3> weight{};
    std::array<std::array<double, 4>, 3> gradient{};
};

namespace detail
{

inline void spline_1d( int order, double u, int& first, std::array<double, 4>& w,
                       std::array<double, 4>& dw )
{
    switch ( order )
    {
    case 1:
    {
        const double i0 = std::floor( u );
        const double f = u - i0;
        first = static_cast<int>( i0 );
        w = { 1.0 - f, f, 0.0, 0.0 };
        dw = { -1.0, 1.0, 0.0, 0.0 };
        break;
    }
    case 2:
    {
        const double i0 = std::floor( u + 0.5 );
        const double t = u - i0;
        first = static_cast<int>( i0 ) - 1;
        const double a = 0.5 - t, b = 0.5 + t;
        w = { 0.5 * a * a, 0.75 - t * t, 0.5 * b * b, 0.0 };
        dw = { -a, -2.0 * t, b, 0.0 };
        break;
    }
    case 3:
    {
        const double i0 = std::floor( u );
        const double f = u - i0;
        first = static_cast<int>( i0 ) - 1;
        const double g = 1.0 - f, f2 = f * f, f3 = f2 * f;
        w = { g * g * g / 6.0, ( 3.0 * f3 - 6.0 * f2 + 4.0 ) / 6.0,
              ( -3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0 ) / 6.0, f3 / 6.0 };
        dw = { -0.5 * g * g, 0.5 * ( 3.0 * f2 - 4.0 * f ),
               0.5 * ( -3.0 * f2 + 2.0 * f + 1.0 ), 0.5 * f2 };
        break;
    }
    default:
        throw std::invalid_argument( "spline_weights: unsupported order " +
                                     std::to_string( order ) );
    }
}

} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Centered cardinal B-spline stencil of the given order at x.

  Linear and cubic stencils start at the node below x; the quadratic stencil
  is centered on the nearest node. Periodic axes wrap x and node indices.
  Throws std::out_of_range if a stencil leaves a non-periodic grid.
*/
inline SplineStencil spline_weights( int order, const Vec3& x,
                                     const StructuredGrid& grid )
{
    if ( order < 1 || order > 3 )
        throw std::invalid_argument( "spline_weights: unsupported order " +
                                     std::to_string( order ) );
    SplineStencil s;
    s.order = order;
    for ( int d = 0; d < 3; ++d )
    {
        const int nodes = grid.nodes( d );
        const double h = grid.spacing( d );
        if ( grid.periodic()[d] && nodes == 1 )
        {
            s.size[d] = 1;
            s.node[d] = { 0, 0, 0, 0 };
            s.weight[d] = { 1.0, 0.0, 0.0, 0.0 };
            s.gradient[d] = { 0.0, 0.0, 0.0, 0.0 };
            continue;
        }
        double xd = x[d];
        if ( grid.periodic()[d] && !( xd >= grid.box().lo[d] && xd < grid.box().hi[d] ) )
            xd = wrap_coordinate( xd, grid.origin()[d], grid.box().length( d ) );
        const double u = ( xd - grid.origin()[d] ) / h;
        int first = 0;
        std::array<double, 4> w{}, dw{};
        detail::spline_1d( order, u, first, w, dw );
        // A point on the upper face of a non-periodic axis.
        if ( !grid.periodic()[d] && order == 1 && first == nodes - 1 && w[1] == 0.0 )
        {
            first -= 1;
            w = { 0.0, 1.0, 0.0, 0.0 };
        }
        s.size[d] = order + 1;
        for ( int m = 0; m <= order; ++m )
        {
            int n = first + m;
            if ( grid.periodic()[d] && ( n < 0 || n >= nodes ) )
                n = ( ( n % nodes ) + nodes ) % nodes;
            else if ( n < 0 || n >= nodes )
                throw std::out_of_range( "spline_weights: stencil leaves the grid" );
            s.node[d][m] = n;
            s.weight[d][m] = w[m];
            s.gradient[d][m] = dw[m] / h;
        }
    }
    return s;
}

//! Visit (node, weight, gradient) over the tensor-product stencil.
template <class Visit>
void for_each_stencil_node( const SplineStencil& s, const StructuredGrid& grid,
                            Visit&& visit )
{
    for ( int a = 0; a < s.size[0]; ++a )
        for ( int b = 0; b < s.size[1]; ++b )
            for ( int c = 0; c < s.size[2]; ++c )
            {
                const double wx = s.weight[0][a], wy = s.weight[1][b],
                             wz = s.weight[2][c];
                const Vec3 g{ s.gradient[0][a] * wy * wz, wx * s.gradient[1][b] * wz,
                              wx * wy * s.gradient[2][c] };
                visit( grid.node_index( s.node[0][a], s.node[1][b], s.node[2][c] ),
                       wx * wy * wz, g );
            }
}

//! Visit (node, weight) over the tensor-product stencil.
template <class Visit>
void for_each_stencil_weight( const SplineStencil& s, const StructuredGrid& grid,
                              Visit&& visit )
{
    for ( int a = 0; a < s.size[0]; ++a )
        for ( int b = 0; b < s.size[1]; ++b )
        {
            const double wxy = s.weight[0][a] * s.weight[1][b];
            const std::size_t row = grid.node_index( s.node[0][a], s.node[1][b], 0 );
            for ( int c = 0; c < s.size[2]; ++c )
                visit( row + s.node[2][c], wxy * s.weight[2][c] );
        }
}

enum class InterpOp
{
    Value,
    Gradient,
    Divergence
};

namespace detail
{

inline Vec3 position_of( FieldView<const double> x, std::size_t i )
{
    return { x( i, 0 ), x( i, 1 ), x( i, 2 ) };
}

template <class Field>
void p2g_range( FieldView<const double> x, FieldView<const double> src,
                Field& dst, const StructuredGrid& grid, int order, InterpOp op,
                std::size_t begin, std::size_t end )
{
    const std::size_t nc = src.components();
    for ( std::size_t i = begin; i < end; ++i )
    {
        const auto s = spline_weights( order, position_of( x, i ), grid );
        if ( op == InterpOp::Value )
        {
            for_each_stencil_weight( s, grid, [&]( std::size_t n, double w ) {
                for ( std::size_t c = 0; c < nc; ++c )
                    dst( n, c ) += src( i, c ) * w;
            } );
            continue;
        }
        for_each_stencil_node( s, grid, [&]( std::size_t n, double, const Vec3& g ) {
            for ( std::size_t c = 0; c < nc; ++c )
                for ( int d = 0; d < 3; ++d )
                    dst( n, 3 * c + d ) += src( i, c ) * g[d];
        } );
    }
}

} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Particle-to-grid accumulation.

  Value adds src * weight into a field with the same component count.
  Gradient adds src * weight-gradient into a field with 3x the components.
  Serial mode accumulates in ascending particle order. Parallel mode fills
  one partial grid per worker and reduces them in worker order.
*/
inline void p2g( FieldView<const double> x, FieldView<const double> src,
                 NodeField& field, int order, InterpOp op = InterpOp::Value,
                 ExecutionMode mode = ExecutionMode::Serial )
{
    if ( op == InterpOp::Divergence )
        throw std::invalid_argument( "p2g: divergence is not a scatter operation" );
    const std::size_t expect =
        op == InterpOp::Value ? src.components() : 3 * src.components();
    if ( field.components() != expect )
        throw std::invalid_argument( "p2g: field component count mismatch" );
    if ( x.size() != src.size() )
        throw std::invalid_argument( "p2g: position and source sizes differ" );

    const auto& grid = field.grid();
    const std::size_t n = x.size();
    const std::size_t workers =
        mode == ExecutionMode::Serial ? 1 : std::min( worker_count(), std::max<std::size_t>( n, 1 ) );
    if ( workers <= 1 )
    {
        detail::p2g_range( x, src, field, grid, order, op, 0, n );
        return;
    }
    std::vector<NodeField> partial( workers, NodeField( grid, field.components() ) );
    {
        std::vector<std::jthread> pool;
        for ( std::size_t w = 0; w < workers; ++w )
        {
            auto [lo, hi] = chunk_range( 0, n, w, workers );
            pool.emplace_back( [&, w, lo = lo, hi = hi] {
                detail::p2g_range( x, src, partial[w], grid, order, op, lo, hi );
            } );
        }
    }
    for ( const auto& p : partial )
        for ( std::size_t k = 0; k < field.data().size(); ++k )
            field.data()[k] += p.data()[k];
}

/*!
  \brief Grid-to-particle interpolation, overwriting dst.

  Value reads the field into dst (same components). Gradient reads the
  gradient of each field component into dst (3x components, component-major).
  Divergence contracts a 3-component field into one scalar.
*/
inline void g2p( const NodeField& field, FieldView<const double> x,
                 FieldView<double> dst, int order, InterpOp op = InterpOp::Value,
                 ExecutionMode mode = ExecutionMode::Serial )
{
    const std::size_t fc = field.components();
    std::size_t expect = fc;
    if ( op == InterpOp::Gradient )
        expect = 3 * fc;
    if ( op == InterpOp::Divergence )
    {
        if ( fc != 3 )
            throw std::invalid_argument( "g2p: divergence needs a 3-component field" );
        expect = 1;
    }
    if ( dst.components() != expect )
        throw std::invalid_argument( "g2p: destination component count mismatch" );
    if ( expect > 9 )
        throw std::invalid_argument( "g2p: more than 9 destination components" );
    if ( x.size() != dst.size() )
        throw std::invalid_argument( "g2p: position and destination sizes differ" );

    const auto& grid = field.grid();
    parallel_for( mode, 0, x.size(), [&]( std::size_t i ) {
        const auto s = spline_weights( order, detail::position_of( x, i ), grid );
        std::array<double, 9> acc{};
        if ( op == InterpOp::Value )
        {
            for_each_stencil_weight( s, grid, [&]( std::size_t n, double w ) {
                for ( std::size_t c = 0; c < fc; ++c )
                    acc[c] += field( n, c ) * w;
            } );
            for ( std::size_t c = 0; c < expect; ++c )
                dst( i, c ) = acc[c];
            return;
        }
        if ( op == InterpOp::Gradient )
            for_each_stencil_node( s, grid, [&]( std::size_t n, double, const Vec3& g ) {
                for ( std::size_t c = 0; c < fc; ++c )
                    for ( int d = 0; d < 3; ++d )
                        acc[3 * c + d] += field( n, c ) * g[d];
            } );
        else
            for_each_stencil_node( s, grid, [&]( std::size_t n, double, const Vec3& g ) {
                acc[0] += field( n, 0 ) * g[0] + field( n, 1 ) * g[1] + field( n, 2 ) * g[2];
            } );
        for ( std::size_t c = 0; c < expect; ++c )
            dst( i, c ) = acc[c];
    } );
}

} // namespace particula

#endif // PARTICULA_GRID_HPP
