#ifndef PARTICULA_PFFT_HPP
#define PARTICULA_PFFT_HPP

#include <particula/decomp.hpp>
#include <particula/grid.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace particula
{

using Complex = std::complex<double>;

enum class FftDirection
{
    Forward,
    Backward
};

//---------------------------------------------------------------------------//
//! Complex grid, row-major with z fastest.
struct ComplexGrid3
{
    Index3 dims{ 1, 1, 1 };
    std::vector<Complex> values;

    ComplexGrid3() = default;

    explicit ComplexGrid3( const Index3& n )
        : dims( n )
        , values( static_cast<std::size_t>( n[0] ) * n[1] * n[2] )
    {
        for ( int d = 0; d < 3; ++d )
            if ( n[d] < 1 )
                throw std::invalid_argument( "ComplexGrid3: dims must be >= 1" );
    }

    std::size_t size() const { return values.size(); }

    std::size_t index( int i, int j, int k ) const
    {
        return ( static_cast<std::size_t>( i ) * dims[1] + j ) * dims[2] + k;
    }

    Complex& operator()( int i, int j, int k ) { return values[index( i, j, k )]; }
    const Complex& operator()( int i, int j, int k ) const
    {
        return values[index( i, j, k )];
    }
};

inline bool is_power_of_two( int n ) { return n > 0 && ( n & ( n - 1 ) ) == 0; }

//---------------------------------------------------------------------------//
/*!
  \brief Direct O(N^2) 3-D DFT. Forward uses exp(-2 pi i k.n/N); backward
  uses the opposite sign and divides by N.
*/
inline ComplexGrid3 dft3_reference( const ComplexGrid3& g, FftDirection dir )
{
    const double sign = dir == FftDirection::Forward ? -1.0 : 1.0;
    std::array<std::vector<Complex>, 3> tw;
    for ( int d = 0; d < 3; ++d )
    {
        const int n = g.dims[d];
        tw[d].resize( n );
        for ( int m = 0; m < n; ++m )
        {
            const double a = sign * 2.0 * std::numbers::pi * m / n;
            tw[d][m] = { std::cos( a ), std::sin( a ) };
        }
    }
    ComplexGrid3 out( g.dims );
    const auto [nx, ny, nz] = g.dims;
    for ( int kx = 0; kx < nx; ++kx )
        for ( int ky = 0; ky < ny; ++ky )
            for ( int kz = 0; kz < nz; ++kz )
            {
                Complex acc = 0.0;
                for ( int x = 0; x < nx; ++x )
                    for ( int y = 0; y < ny; ++y )
                    {
                        const Complex wxy = tw[0][( kx * x ) % nx] * tw[1][( ky * y ) % ny];
                        for ( int z = 0; z < nz; ++z )
                            acc += g( x, y, z ) * wxy * tw[2][( kz * z ) % nz];
                    }
                out( kx, ky, kz ) = acc;
            }
    if ( dir == FftDirection::Backward )
    {
        const double s = 1.0 / static_cast<double>( g.size() );
        for ( auto& v : out.values )
            v *= s;
    }
    return out;
}

namespace detail
{

//! Iterative radix-2 transform of a contiguous line, unnormalized.
inline void fft_line( std::vector<Complex>& a, FftDirection dir )
{
    const std::size_t n = a.size();
    if ( n <= 1 )
        return;
    for ( std::size_t i = 1, j = 0; i < n; ++i )
    {
        std::size_t bit = n >> 1;
        for ( ; j & bit; bit >>= 1 )
            j ^= bit;
        j ^= bit;
        if ( i < j )
            std::swap( a[i], a[j] );
    }
    const double sign = dir == FftDirection::Forward ? -1.0 : 1.0;
    for ( std::size_t len = 2; len <= n; len <<= 1 )
    {
        const std::size_t half = len / 2;
        for ( std::size_t k = 0; k < half; ++k )
        {
            const double ang = sign * 2.0 * std::numbers::pi * k / len;
            const Complex w( std::cos( ang ), std::sin( ang ) );
            for ( std::size_t s = 0; s < n; s += len )
            {
                const Complex u = a[s + k];
                const Complex v = a[s + k + half] * w;
                a[s + k] = u + v;
                a[s + k + half] = u - v;
            }
        }
    }
}

//! Transform every line along `axis` of a row-major local block.
inline void fft_lines( std::vector<Complex>& data, const Index3& ext, int axis,
                       FftDirection dir )
{
    const int n = ext[axis];
    std::size_t stride = 1;
    for ( int d = axis + 1; d < 3; ++d )
        stride *= ext[d];
    std::vector<Complex> line( n );
    const std::size_t total = data.size();
    const std::size_t block = stride * n;
    for ( std::size_t base = 0; base < total; base += block )
        for ( std::size_t off = 0; off < stride; ++off )
        {
            for ( int m = 0; m < n; ++m )
                line[m] = data[base + off + m * stride];
            fft_line( line, dir );
            for ( int m = 0; m < n; ++m )
                data[base + off + m * stride] = line[m];
        }
}

inline void scale_backward( std::vector<Complex>& data, std::size_t total )
{
    const double s = 1.0 / static_cast<double>( total );
    for ( auto& v : data )
        v *= s;
}

} // namespace detail

//! Radix-2 3-D FFT: lines along x, then y, then z.
inline ComplexGrid3 fft3_serial( const ComplexGrid3& g, FftDirection dir )
{
    for ( int d = 0; d < 3; ++d )
        if ( !is_power_of_two( g.dims[d] ) )
            throw std::invalid_argument( "fft3_serial: dims must be powers of two" );
    ComplexGrid3 out = g;
    for ( int axis = 0; axis < 3; ++axis )
        detail::fft_lines( out.values, out.dims, axis, dir );
    if ( dir == FftDirection::Backward )
        detail::scale_backward( out.values, out.size() );
    return out;
}

//---------------------------------------------------------------------------//
// Distributed layouts
//---------------------------------------------------------------------------//

enum class GridLayout
{
    Brick,
    PencilX,
    PencilY,
    PencilZ
};

inline std::string to_string( GridLayout l )
{
    switch ( l )
    {
    case GridLayout::Brick:
        return "brick";
    case GridLayout::PencilX:
        return "pencil_x";
    case GridLayout::PencilY:
        return "pencil_y";
    case GridLayout::PencilZ:
        return "pencil_z";
    }
    return "?";
}

//! Half-open index block [lo, hi) of the global grid.
struct GridBlock
{
    Index3 lo{ 0, 0, 0 };
    Index3 hi{ 0, 0, 0 };

    Index3 extent() const { return { hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2] }; }

    std::size_t size() const
    {
        const auto e = extent();
        return static_cast<std::size_t>( e[0] ) * e[1] * e[2];
    }

    bool contains( const Index3& p ) const
    {
        for ( int d = 0; d < 3; ++d )
            if ( p[d] < lo[d] || p[d] >= hi[d] )
                return false;
        return true;
    }

    //! Row-major offset of global point p inside the block.
    std::size_t offset( const Index3& p ) const
    {
        const auto e = extent();
        return ( static_cast<std::size_t>( p[0] - lo[0] ) * e[1] + ( p[1] - lo[1] ) ) *
                   e[2] +
               ( p[2] - lo[2] );
    }

    GridBlock intersect( const GridBlock& o ) const
    {
        GridBlock b;
        for ( int d = 0; d < 3; ++d )
        {
            b.lo[d] = std::max( lo[d], o.lo[d] );
            b.hi[d] = std::max( b.lo[d], std::min( hi[d], o.hi[d] ) );
        }
        return b;
    }
};

//! Near-square factorization p0 * p1 = n with p0 >= p1.
inline std::pair<int, int> near_square_factors( int n )
{
    int b = static_cast<int>( std::sqrt( static_cast<double>( n ) ) );
    while ( b > 1 && n % b != 0 )
        --b;
    b = std::max( b, 1 );
    return { n / b, b };
}

//---------------------------------------------------------------------------//
/*!
  \brief Brick and pencil layouts of an n_g grid over a fabric.

  Bricks follow the fabric's rank blocks. A pencil layout along axis a tiles
  the two orthogonal axes with a near-square factorization of the rank count,
  the larger factor on the lower axis; pencil rank (r0, r1) is r0 * p1 + r1.
*/
class PencilPlan
{
  public:
    PencilPlan( DomainFabric& fabric, const Index3& n_g )
        : _fabric( &fabric )
        , _n( n_g )
    {
        const int nr = fabric.size();
        for ( int d = 0; d < 3; ++d )
        {
            if ( !is_power_of_two( n_g[d] ) )
                throw std::invalid_argument( "PencilPlan: grid dims must be powers of two" );
            if ( fabric.dims()[d] > n_g[d] )
                throw std::invalid_argument( "PencilPlan: more brick ranks than grid points along an axis" );
        }
        const auto [p0, p1] = near_square_factors( nr );
        for ( int a = 0; a < 3; ++a )
        {
            const auto [b, c] = orthogonal_axes( a );
            if ( static_cast<long>( nr ) > static_cast<long>( n_g[b] ) * n_g[c] ||
                 p0 > n_g[b] || p1 > n_g[c] )
                throw std::invalid_argument(
                    "PencilPlan: rank count too large for a pencil layout" );
            _tiling[a] = { p0, p1 };
        }
        for ( auto l : { GridLayout::Brick, GridLayout::PencilX, GridLayout::PencilY,
                         GridLayout::PencilZ } )
        {
            auto& blocks = _blocks[static_cast<int>( l )];
            blocks.resize( nr );
            for ( int r = 0; r < nr; ++r )
                blocks[r] = make_block( l, r );
        }
    }

    DomainFabric& fabric() const { return *_fabric; }
    const Index3& grid_dims() const { return _n; }
    int ranks() const { return _fabric->size(); }

    std::size_t total_points() const
    {
        return static_cast<std::size_t>( _n[0] ) * _n[1] * _n[2];
    }

    const GridBlock& block( GridLayout l, int rank ) const
    {
        return _blocks[static_cast<int>( l )][rank];
    }

    //! Rank tiling (p_lower, p_upper) of the face orthogonal to axis a.
    std::pair<int, int> pencil_tiling( int a ) const { return _tiling[a]; }

    static std::pair<int, int> orthogonal_axes( int a )
    {
        return a == 0 ? std::pair{ 1, 2 } : a == 1 ? std::pair{ 0, 2 } : std::pair{ 0, 1 };
    }

  private:
    static int split( int n, int parts, int c ) { return static_cast<int>( static_cast<long>( n ) * c / parts ); }

    GridBlock make_block( GridLayout l, int r ) const
    {
        GridBlock b;
        if ( l == GridLayout::Brick )
        {
            const auto c = _fabric->coords_of( r );
            const auto& dims = _fabric->dims();
            for ( int d = 0; d < 3; ++d )
            {
                b.lo[d] = split( _n[d], dims[d], c[d] );
                b.hi[d] = split( _n[d], dims[d], c[d] + 1 );
            }
            return b;
        }
        const int a = static_cast<int>( l ) - 1;
        const auto [d0, d1] = orthogonal_axes( a );
        const auto [p0, p1] = _tiling[a];
        const int r0 = r / p1, r1 = r % p1;
        b.lo[a] = 0;
        b.hi[a] = _n[a];
        b.lo[d0] = split( _n[d0], p0, r0 );
        b.hi[d0] = split( _n[d0], p0, r0 + 1 );
        b.lo[d1] = split( _n[d1], p1, r1 );
        b.hi[d1] = split( _n[d1], p1, r1 + 1 );
        return b;
    }

    DomainFabric* _fabric;
    Index3 _n;
    std::array<std::pair<int, int>, 3> _tiling{};
    std::array<std::vector<GridBlock>, 4> _blocks;
};

//! Per-rank row-major block data.
using DistributedGrid = std::vector<std::vector<Complex>>;

namespace detail
{

inline bool is_supported_pair( GridLayout from, GridLayout to )
{
    return from != to &&
           ( from == GridLayout::Brick || to == GridLayout::Brick );
}

//! Visit the points of block b in row-major order.
template <class Visit>
void for_each_point( const GridBlock& b, Visit&& visit )
{
    for ( int i = b.lo[0]; i < b.hi[0]; ++i )
        for ( int j = b.lo[1]; j < b.hi[1]; ++j )
            for ( int k = b.lo[2]; k < b.hi[2]; ++k )
                visit( Index3{ i, j, k } );
}

} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Move block data from one layout to another through fabric messages.

  Only brick<->pencil pairs are supported. Each rank sends the intersection
  of its source block with every other rank's destination block, row-major;
  the self intersection is copied locally.
*/
inline void redistribute( const PencilPlan& plan, DistributedGrid& data,
                          GridLayout from, GridLayout to )
{
    if ( !detail::is_supported_pair( from, to ) )
        throw std::invalid_argument( "redistribute: unsupported layout pair " +
                                     to_string( from ) + " -> " + to_string( to ) );
    const int nr = plan.ranks();
    if ( static_cast<int>( data.size() ) != nr )
        throw std::invalid_argument( "redistribute: fabric/grid mismatch" );
    for ( int r = 0; r < nr; ++r )
        if ( data[r].size() != plan.block( from, r ).size() )
            throw std::invalid_argument( "redistribute: fabric/grid mismatch" );

    auto& fabric = plan.fabric();
    DistributedGrid out( nr );
    for ( int r = 0; r < nr; ++r )
        out[r].resize( plan.block( to, r ).size() );

    for ( int r = 0; r < nr; ++r )
    {
        const auto& src = plan.block( from, r );
        for ( int q = 0; q < nr; ++q )
        {
            const auto& dst = plan.block( to, q );
            const auto ov = src.intersect( dst );
            if ( ov.size() == 0 )
                continue;
            if ( q == r )
            {
                detail::for_each_point( ov, [&]( const Index3& p ) {
                    out[r][dst.offset( p )] = data[r][src.offset( p )];
                } );
                continue;
            }
            std::vector<std::byte> payload;
            payload.reserve( ov.size() * sizeof( Complex ) );
            detail::for_each_point( ov, [&]( const Index3& p ) {
                append_bytes( payload, data[r][src.offset( p )] );
            } );
            fabric.send( r, q, std::move( payload ) );
        }
    }
    for ( int q = 0; q < nr; ++q )
    {
        const auto& dst = plan.block( to, q );
        for ( const auto& msg : fabric.receive( q ) )
        {
            const auto ov = plan.block( from, msg.source ).intersect( dst );
            const std::byte* p = msg.payload.data();
            detail::for_each_point( ov, [&]( const Index3& g ) {
                out[q][dst.offset( g )] = read_bytes<Complex>( p );
            } );
        }
    }
    data = std::move( out );
}

//! Split a global grid into brick blocks.
inline DistributedGrid scatter_bricks( const PencilPlan& plan, const ComplexGrid3& g )
{
    if ( g.dims != plan.grid_dims() )
        throw std::invalid_argument( "scatter_bricks: fabric/grid mismatch" );
    DistributedGrid out( plan.ranks() );
    for ( int r = 0; r < plan.ranks(); ++r )
    {
        const auto& b = plan.block( GridLayout::Brick, r );
        out[r].resize( b.size() );
        detail::for_each_point( b, [&]( const Index3& p ) {
            out[r][b.offset( p )] = g( p[0], p[1], p[2] );
        } );
    }
    return out;
}

//! Assemble brick blocks into one global grid.
inline ComplexGrid3 gather_bricks( const PencilPlan& plan, const DistributedGrid& data )
{
    ComplexGrid3 g( plan.grid_dims() );
    for ( int r = 0; r < plan.ranks(); ++r )
    {
        const auto& b = plan.block( GridLayout::Brick, r );
        detail::for_each_point( b, [&]( const Index3& p ) {
            g( p[0], p[1], p[2] ) = data[r][b.offset( p )];
        } );
    }
    return g;
}

/*!
  \brief Distributed 3-D FFT of brick-resident data.

  For each axis: brick -> pencil, 1-D transforms on local lines, pencil ->
  brick. Backward scaling is applied on the bricks at the end.
*/
inline void fft3_distributed( const PencilPlan& plan, DistributedGrid& data,
                              FftDirection dir )
{
    if ( static_cast<int>( data.size() ) != plan.ranks() )
        throw std::invalid_argument( "fft3_distributed: fabric/grid mismatch" );
    for ( int r = 0; r < plan.ranks(); ++r )
        if ( data[r].size() != plan.block( GridLayout::Brick, r ).size() )
            throw std::invalid_argument( "fft3_distributed: fabric/grid mismatch" );
    for ( int axis = 0; axis < 3; ++axis )
    {
        const auto pencil = static_cast<GridLayout>( axis + 1 );
        redistribute( plan, data, GridLayout::Brick, pencil );
        for ( int r = 0; r < plan.ranks(); ++r )
            detail::fft_lines( data[r], plan.block( pencil, r ).extent(), axis, dir );
        redistribute( plan, data, pencil, GridLayout::Brick );
    }
    if ( dir == FftDirection::Backward )
        for ( auto& d : data )
            detail::scale_backward( d, plan.total_points() );
}

//---------------------------------------------------------------------------//
// Communication pattern
//---------------------------------------------------------------------------//

struct StageCount
{
    GridLayout from = GridLayout::Brick;
    GridLayout to = GridLayout::Brick;
    //! Unordered rank pairs r != r' that exchange data.
    std::size_t pairs = 0;
    //! Largest number of destination blocks any source block overlaps,
    //! its own rank included.
    std::size_t fan_out = 0;
    //! Bytes moved between distinct ranks.
    std::size_t bytes = 0;
};

//! Rank pairs exchanging data between two layouts, by block overlap.
inline StageCount stage_count( const PencilPlan& plan, GridLayout from, GridLayout to )
{
    StageCount s;
    s.from = from;
    s.to = to;
    const int nr = plan.ranks();
    std::set<std::pair<int, int>> pairs;
    for ( int r = 0; r < nr; ++r )
    {
        std::size_t touched = 0;
        for ( int q = 0; q < nr; ++q )
        {
            const auto n = plan.block( from, r ).intersect( plan.block( to, q ) ).size();
            if ( n == 0 )
                continue;
            ++touched;
            if ( q == r )
                continue;
            s.bytes += n * sizeof( Complex );
            pairs.insert( { std::min( r, q ), std::max( r, q ) } );
        }
        s.fan_out = std::max( s.fan_out, touched );
    }
    s.pairs = pairs.size();
    return s;
}

/*!
  \brief Per-stage counts of the distributed FFT sequence, in execution
  order, followed by the hypothetical pencil<->pencil stages x->y and y->z.
*/
inline std::vector<StageCount> message_pair_count( const PencilPlan& plan )
{
    std::vector<StageCount> out;
    for ( int axis = 0; axis < 3; ++axis )
    {
        const auto pencil = static_cast<GridLayout>( axis + 1 );
        out.push_back( stage_count( plan, GridLayout::Brick, pencil ) );
        out.push_back( stage_count( plan, pencil, GridLayout::Brick ) );
    }
    out.push_back( stage_count( plan, GridLayout::PencilX, GridLayout::PencilY ) );
    out.push_back( stage_count( plan, GridLayout::PencilY, GridLayout::PencilZ ) );
    return out;
}

//---------------------------------------------------------------------------//
// Spectral Poisson solver
//---------------------------------------------------------------------------//

namespace detail
{

//! Signed wavenumber index of m on an n-point axis, in [-n/2, n/2).
inline int signed_mode( int m, int n ) { return m < ( n + 1 ) / 2 ? m : m - n; }

//! Multiply a spectrum point by 1/|k|^2 (phi) or i k_d/|k|^2 (gradient d).
//! Nyquist wavenumbers carry no gradient; k = 0 is zeroed.
inline Complex poisson_factor( const Index3& p, const Index3& n, const Vec3& L,
                               int component )
{
    Vec3 k;
    double k2 = 0.0;
    for ( int d = 0; d < 3; ++d )
    {
        k[d] = 2.0 * std::numbers::pi * signed_mode( p[d], n[d] ) / L[d];
        k2 += k[d] * k[d];
    }
    if ( k2 == 0.0 )
        return 0.0;
    if ( component < 0 )
        return 1.0 / k2;
    const int d = component;
    if ( n[d] % 2 == 0 && p[d] == n[d] / 2 )
        return 0.0;
    return Complex( 0.0, k[d] / k2 );
}

} // namespace detail

struct PoissonResult
{
    NodeField phi;
    NodeField force; // 3 components
    //! Largest |imag| discarded from any backward transform.
    double max_imag = 0.0;
};

/*!
  \brief Potential and spectral gradient of a periodic charge density.

  phi_k = rho_k / |k|^2 with the k = 0 mode removed, and force = grad phi
  from backward transforms of i k phi_k; -div(force) = rho - mean(rho).
  The grid's cells give the transform size. With_force = false skips the
  gradient and leaves force zero.
*/
inline PoissonResult poisson_spectral( const NodeField& rho, bool with_force = true )
{
    const auto& grid = rho.grid();
    if ( rho.components() != 1 )
        throw std::invalid_argument( "poisson_spectral: scalar density expected" );
    for ( int d = 0; d < 3; ++d )
        if ( !grid.periodic()[d] )
            throw std::invalid_argument( "poisson_spectral: periodic grid required" );
    const Index3 n = grid.cells();
    ComplexGrid3 g( n );
    for ( std::size_t i = 0; i < g.size(); ++i )
        g.values[i] = rho( i );
    const auto rho_k = fft3_serial( g, FftDirection::Forward );
    const auto L = grid.box().lengths();

    PoissonResult out{ NodeField( grid ), NodeField( grid, 3 ), 0.0 };
    for ( int comp = -1; comp < ( with_force ? 3 : 0 ); ++comp )
    {
        ComplexGrid3 s( n );
        for ( int i = 0; i < n[0]; ++i )
            for ( int j = 0; j < n[1]; ++j )
                for ( int k = 0; k < n[2]; ++k )
                    s( i, j, k ) = rho_k( i, j, k ) *
                                   detail::poisson_factor( { i, j, k }, n, L, comp );
        const auto r = fft3_serial( s, FftDirection::Backward );
        for ( std::size_t i = 0; i < r.size(); ++i )
        {
            out.max_imag = std::max( out.max_imag, std::abs( r.values[i].imag() ) );
            if ( comp < 0 )
                out.phi( i ) = r.values[i].real();
            else
                out.force( i, comp ) = r.values[i].real();
        }
    }
    return out;
}

//! Distributed result: per-rank brick blocks.
struct DistributedPoissonResult
{
    std::vector<std::vector<double>> phi;
    std::array<std::vector<std::vector<double>>, 3> force;
    double max_imag = 0.0;
};

//! Distributed solve: one forward and four backward distributed FFTs.
inline DistributedPoissonResult poisson_spectral( const PencilPlan& plan,
                                                  const std::vector<std::vector<double>>& rho,
                                                  const Box& box )
{
    const int nr = plan.ranks();
    if ( static_cast<int>( rho.size() ) != nr )
        throw std::invalid_argument( "poisson_spectral: fabric/grid mismatch" );
    DistributedGrid spec( nr );
    for ( int r = 0; r < nr; ++r )
    {
        if ( rho[r].size() != plan.block( GridLayout::Brick, r ).size() )
            throw std::invalid_argument( "poisson_spectral: fabric/grid mismatch" );
        spec[r].assign( rho[r].begin(), rho[r].end() );
    }
    fft3_distributed( plan, spec, FftDirection::Forward );
    const auto n = plan.grid_dims();
    const auto L = box.lengths();

    DistributedPoissonResult out;
    out.phi.resize( nr );
    for ( auto& f : out.force )
        f.resize( nr );
    for ( int comp = -1; comp < 3; ++comp )
    {
        DistributedGrid s = spec;
        for ( int r = 0; r < nr; ++r )
        {
            const auto& b = plan.block( GridLayout::Brick, r );
            detail::for_each_point( b, [&]( const Index3& p ) {
                s[r][b.offset( p )] *= detail::poisson_factor( p, n, L, comp );
            } );
        }
        fft3_distributed( plan, s, FftDirection::Backward );
        for ( int r = 0; r < nr; ++r )
        {
            auto& dst = comp < 0 ? out.phi[r] : out.force[comp][r];
            dst.resize( s[r].size() );
            for ( std::size_t i = 0; i < s[r].size(); ++i )
            {
                out.max_imag = std::max( out.max_imag, std::abs( s[r][i].imag() ) );
                dst[i] = s[r][i].real();
            }
        }
    }
    return out;
}

} // namespace particula

#endif // PARTICULA_PFFT_HPP
