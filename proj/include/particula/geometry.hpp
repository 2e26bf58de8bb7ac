#ifndef PARTICULA_GEOMETRY_HPP
#define PARTICULA_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <stdexcept>

namespace particula
{

using Vec3 = std::array<double, 3>;
using Index3 = std::array<int, 3>;
using Periodic = std::array<bool, 3>;

//! Axis-aligned box [lo, hi).
struct Box
{
    Vec3 lo{ 0.0, 0.0, 0.0 };
    Vec3 hi{ 1.0, 1.0, 1.0 };

    double length( int d ) const { return hi[d] - lo[d]; }
    Vec3 lengths() const { return { length( 0 ), length( 1 ), length( 2 ) }; }
    double volume() const { return length( 0 ) * length( 1 ) * length( 2 ); }

    bool empty() const
    {
        return !( hi[0] > lo[0] && hi[1] > lo[1] && hi[2] > lo[2] );
    }

    //! Half-open containment test.
    bool contains( const Vec3& x ) const
    {
        for ( int d = 0; d < 3; ++d )
            if ( !( x[d] >= lo[d] && x[d] < hi[d] ) )
                return false;
        return true;
    }

    //! Box grown by w on every face.
    Box expanded( double w ) const
    {
        return { { lo[0] - w, lo[1] - w, lo[2] - w },
                 { hi[0] + w, hi[1] + w, hi[2] + w } };
    }

    static Box cube( double L ) { return { { 0.0, 0.0, 0.0 }, { L, L, L } }; }
};

//! Map x into [lo, hi) on one periodic axis.
inline double wrap_coordinate( double x, double lo, double L )
{
    double y = x - L * std::floor( ( x - lo ) / L );
    // floor() rounding can land exactly on hi.
    if ( y >= lo + L )
        y -= L;
    if ( y < lo )
        y = lo;
    return y;
}

/*!
  \brief Nearest periodic image of xj relative to xi along one axis.

  Returned as the image position (xj + shift) rather than the difference so
  that single-domain and ghost-based computations round identically: a ghost
  stores fl(xj + shift) and callers subtract xi afterwards.
*/
inline double nearest_image( double xi, double xj, double L )
{
    const double k = std::nearbyint( ( xj - xi ) / L );
    return k == 0.0 ? xj : xj - k * L;
}

//! Squared distance from point x to box b (zero when inside).
inline double distance2_to_box( const Vec3& x, const Box& b )
{
    double r2 = 0.0;
    for ( int d = 0; d < 3; ++d )
    {
        double g = 0.0;
        if ( x[d] < b.lo[d] )
            g = b.lo[d] - x[d];
        else if ( x[d] > b.hi[d] )
            g = x[d] - b.hi[d];
        r2 += g * g;
    }
    return r2;
}

} // namespace particula

#endif // PARTICULA_GEOMETRY_HPP
