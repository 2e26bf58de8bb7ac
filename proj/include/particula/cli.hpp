#ifndef PARTICULA_CLI_HPP
#define PARTICULA_CLI_HPP

#include <particula/error.hpp>
#include <particula/longrange.hpp>
#include <particula/md.hpp>
#include <particula/pfft.hpp>
#include <particula/pic.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace particula
{
namespace cli
{

using json = nlohmann::json;

//---------------------------------------------------------------------------//
/*!
  \brief Effective run configuration.

  Optional fields default per subcommand; resolve() fills them in.
*/
struct RunConfig
{
    std::string subcommand = "md";
    std::uint64_t seed = 1;
    Index3 ranks{ 1, 1, 1 };
    int vector_length = 16;
    std::vector<int> vector_lengths{ 1, 4, 8, 16 };
    int steps = 100;
    std::optional<double> dt;
    bool deterministic = true;
    std::string output;
    std::string timing_output;

    // md
    int cells = 4;
    double density = 0.8442;
    double temperature = 0.8;
    std::optional<double> r_cut;
    double skin = 0.0;
    int neighbor_stride = 1;
    int sort_stride = 0;
    bool shift_energy = true;
    std::string neighbor_layout = "compressed";

    // pic, pic-implicit
    Index3 grid{ 64, 64, 1 };
    Vec3 lengths{ 6.4, 6.4, 1.0 };
    std::optional<long long> particles;
    double omega_p = 1.0;
    double beam_speed = 1.0;
    double amplitude = 0.01;
    int mode = 1;
    std::optional<int> spline_order;
    bool filter = false;
    double picard_tol = 1e-13;
    int picard_max_iters = 100;

    // sgct
    std::vector<int> levels{ 4, 5, 6 };

    // fft-bench
    Index3 fft_grid{ 64, 64, 64 };
    std::vector<int> rank_counts{ 1, 8, 27, 64 };

    // spme-check
    int charges = 64;
    double box_length = 10.0;
    int mesh = 64;
    int configurations = 1;
    double fd_tol = 1e-5;
};

enum class Kind
{
    Int,
    UInt64,
    Double,
    Bool,
    String,
    Int3,
    Double3,
    IntList
};

struct KeySpec
{
    const char* key;
    Kind kind;
    const char* help;
};

inline const std::vector<KeySpec>& key_specs()
{
    static const std::vector<KeySpec> specs = {
        { "subcommand", Kind::String,
          "md | pic | pic-implicit | sgct | fft-bench | layout-bench | spme-check" },
        { "seed", Kind::UInt64, "random seed" },
        { "ranks", Kind::Int3, "rank grid for md" },
        { "vector_length", Kind::Int, "AoSoA vector length V" },
        { "vector_lengths", Kind::IntList, "V sweep for layout-bench" },
        { "steps", Kind::Int, "time steps" },
        { "dt", Kind::Double, "time step (md 0.005, pic 0.1, pic-implicit 0.5)" },
        { "deterministic", Kind::Bool, "serial kernels (false: parallel)" },
        { "output", Kind::String, "CSV path (empty: stdout)" },
        { "timing_output", Kind::String, "md phase timing CSV path (empty: none)" },
        { "cells", Kind::Int, "md FCC cells per axis" },
        { "density", Kind::Double, "md number density" },
        { "temperature", Kind::Double, "md initial temperature" },
        { "r_cut", Kind::Double, "cutoff (md 2.5, spme-check box_length/2)" },
        { "skin", Kind::Double, "md neighbor skin" },
        { "neighbor_stride", Kind::Int, "md max steps between list rebuilds" },
        { "sort_stride", Kind::Int, "spatial resort stride (0: off)" },
        { "shift_energy", Kind::Bool, "md shift LJ energy to zero at cutoff" },
        { "neighbor_layout", Kind::String, "md list layout: compressed | dense" },
        { "grid", Kind::Int3, "pic grid cells" },
        { "lengths", Kind::Double3, "pic box lengths" },
        { "particles", Kind::Int, "particle count (pic 100000, sgct 1000000)" },
        { "omega_p", Kind::Double, "pic plasma frequency" },
        { "beam_speed", Kind::Double, "pic counter-streaming beam speed" },
        { "amplitude", Kind::Double, "pic density perturbation amplitude" },
        { "mode", Kind::Int, "pic perturbation mode number" },
        { "spline_order", Kind::Int, "spline order (pic 1, pic-implicit 2, spme-check 3)" },
        { "filter", Kind::Bool, "pic binomial filter" },
        { "picard_tol", Kind::Double, "pic-implicit Picard tolerance" },
        { "picard_max_iters", Kind::Int, "pic-implicit Picard iteration cap" },
        { "levels", Kind::IntList, "sgct levels" },
        { "fft_grid", Kind::Int3, "fft-bench grid points" },
        { "rank_counts", Kind::IntList, "fft-bench rank counts" },
        { "charges", Kind::Int, "spme-check charges per configuration" },
        { "box_length", Kind::Double, "spme-check cubic box edge" },
        { "mesh", Kind::Int, "spme-check mesh points per axis" },
        { "configurations", Kind::Int, "spme-check random configurations" },
        { "fd_tol", Kind::Double, "spme-check finite-difference tolerance" },
    };
    return specs;
}

inline const KeySpec* find_key( const std::string& key )
{
    for ( const auto& s : key_specs() )
        if ( key == s.key )
            return &s;
    return nullptr;
}

inline std::string kebab( std::string key )
{
    for ( auto& c : key )
        if ( c == '_' )
            c = '-';
    return key;
}

//---------------------------------------------------------------------------//
// JSON <-> RunConfig
//---------------------------------------------------------------------------//

namespace detail
{

inline const char* kind_name( Kind k )
{
    switch ( k )
    {
    case Kind::Int:
    case Kind::UInt64:
        return "integer";
    case Kind::Double:
        return "number";
    case Kind::Bool:
        return "boolean";
    case Kind::String:
        return "string";
    case Kind::Int3:
        return "array of 3 integers";
    case Kind::Double3:
        return "array of 3 numbers";
    case Kind::IntList:
        return "array of integers";
    }
    return "value";
}

inline bool matches( const json& v, Kind k )
{
    switch ( k )
    {
    case Kind::Int:
        return v.is_number_integer();
    case Kind::UInt64:
        return v.is_number_unsigned() ||
               ( v.is_number_integer() && v.get<std::int64_t>() >= 0 );
    case Kind::Double:
        return v.is_number();
    case Kind::Bool:
        return v.is_boolean();
    case Kind::String:
        return v.is_string();
    case Kind::Int3:
    case Kind::Double3:
    case Kind::IntList:
    {
        if ( !v.is_array() || ( k != Kind::IntList && v.size() != 3 ) || v.empty() )
            return false;
        for ( const auto& e : v )
            if ( k == Kind::Double3 ? !e.is_number() : !e.is_number_integer() )
                return false;
        return true;
    }
    }
    return false;
}

template <class T>
T get_int( const json& v, const std::string& key )
{
    const auto i = v.get<std::int64_t>();
    if ( i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max() )
        throw ConfigError( "value out of range for key: " + key );
    return static_cast<T>( i );
}

} // namespace detail

//! Strict conversion: unknown keys and type mismatches throw ConfigError.
inline RunConfig from_json( const json& doc )
{
    if ( !doc.is_object() )
        throw ConfigError( "config must be a JSON object" );
    for ( auto it = doc.begin(); it != doc.end(); ++it )
    {
        const auto* spec = find_key( it.key() );
        if ( !spec )
            throw ConfigError( "unknown key: " + it.key() );
        if ( !detail::matches( it.value(), spec->kind ) )
            throw ConfigError( "type mismatch for key " + it.key() + ": expected " +
                               detail::kind_name( spec->kind ) );
    }
    RunConfig c;
    auto has = [&]( const char* k ) { return doc.contains( k ); };
    auto i = [&]( const char* k, int& out ) {
        if ( has( k ) )
            out = detail::get_int<int>( doc[k], k );
    };
    auto d = [&]( const char* k, double& out ) {
        if ( has( k ) )
            out = doc[k].get<double>();
    };
    auto b = [&]( const char* k, bool& out ) {
        if ( has( k ) )
            out = doc[k].get<bool>();
    };
    auto s = [&]( const char* k, std::string& out ) {
        if ( has( k ) )
            out = doc[k].get<std::string>();
    };
    auto i3 = [&]( const char* k, Index3& out ) {
        if ( has( k ) )
            for ( int a = 0; a < 3; ++a )
                out[a] = detail::get_int<int>( doc[k][a], k );
    };
    auto il = [&]( const char* k, std::vector<int>& out ) {
        if ( !has( k ) )
            return;
        out.clear();
        for ( const auto& e : doc[k] )
            out.push_back( detail::get_int<int>( e, k ) );
    };

    s( "subcommand", c.subcommand );
    if ( has( "seed" ) )
        c.seed = doc["seed"].get<std::uint64_t>();
    i3( "ranks", c.ranks );
    i( "vector_length", c.vector_length );
    il( "vector_lengths", c.vector_lengths );
    i( "steps", c.steps );
    if ( has( "dt" ) )
        c.dt = doc["dt"].get<double>();
    b( "deterministic", c.deterministic );
    s( "output", c.output );
    s( "timing_output", c.timing_output );
    i( "cells", c.cells );
    d( "density", c.density );
    d( "temperature", c.temperature );
    if ( has( "r_cut" ) )
        c.r_cut = doc["r_cut"].get<double>();
    d( "skin", c.skin );
    i( "neighbor_stride", c.neighbor_stride );
    i( "sort_stride", c.sort_stride );
    b( "shift_energy", c.shift_energy );
    s( "neighbor_layout", c.neighbor_layout );
    i3( "grid", c.grid );
    if ( has( "lengths" ) )
        for ( int a = 0; a < 3; ++a )
            c.lengths[a] = doc["lengths"][a].get<double>();
    if ( has( "particles" ) )
        c.particles = doc["particles"].get<long long>();
    d( "omega_p", c.omega_p );
    d( "beam_speed", c.beam_speed );
    d( "amplitude", c.amplitude );
    i( "mode", c.mode );
    if ( has( "spline_order" ) )
        c.spline_order = detail::get_int<int>( doc["spline_order"], "spline_order" );
    b( "filter", c.filter );
    d( "picard_tol", c.picard_tol );
    i( "picard_max_iters", c.picard_max_iters );
    il( "levels", c.levels );
    i3( "fft_grid", c.fft_grid );
    il( "rank_counts", c.rank_counts );
    i( "charges", c.charges );
    d( "box_length", c.box_length );
    i( "mesh", c.mesh );
    i( "configurations", c.configurations );
    d( "fd_tol", c.fd_tol );
    return c;
}

//! Fills subcommand-dependent defaults and checks every constraint.
inline RunConfig resolve( RunConfig c )
{
    auto fail = []( const std::string& m ) { throw ConfigError( m ); };
    const std::string& sc = c.subcommand;
    if ( sc != "md" && sc != "pic" && sc != "pic-implicit" && sc != "sgct" &&
         sc != "fft-bench" && sc != "layout-bench" && sc != "spme-check" )
        fail( "unknown subcommand: " + sc );

    if ( !c.dt )
        c.dt = sc == "md" ? 0.005 : sc == "pic-implicit" ? 0.5 : sc == "layout-bench" ? 0.005 : 0.1;
    if ( !c.r_cut )
        c.r_cut = sc == "spme-check" ? 0.5 * c.box_length : 2.5;
    if ( !c.particles )
        c.particles = sc == "sgct" ? 1000000 : 100000;
    if ( !c.spline_order )
        c.spline_order = sc == "pic-implicit" ? 2 : sc == "spme-check" ? 3 : 1;

    for ( int a = 0; a < 3; ++a )
        if ( c.ranks[a] < 1 || c.grid[a] < 1 || c.fft_grid[a] < 1 || !( c.lengths[a] > 0.0 ) )
            fail( "ranks, grid, fft_grid and lengths must be positive" );
    if ( c.vector_length < 1 )
        fail( "vector_length must be positive" );
    if ( c.vector_lengths.empty() || c.levels.empty() || c.rank_counts.empty() )
        fail( "vector_lengths, levels and rank_counts must not be empty" );
    for ( int v : c.vector_lengths )
        if ( v < 1 )
            fail( "vector_lengths entries must be positive" );
    for ( int r : c.rank_counts )
        if ( r < 1 )
            fail( "rank_counts entries must be positive" );
    if ( c.steps < 0 )
        fail( "steps must be non-negative" );
    if ( !( *c.dt > 0.0 ) || !std::isfinite( *c.dt ) )
        fail( "dt must be positive" );
    if ( c.cells < 1 || !( c.density > 0.0 ) || !( c.temperature >= 0.0 ) )
        fail( "cells and density must be positive, temperature non-negative" );
    if ( !( *c.r_cut > 0.0 ) || !( c.skin >= 0.0 ) )
        fail( "r_cut must be positive and skin non-negative" );
    if ( c.neighbor_stride < 1 || c.sort_stride < 0 )
        fail( "neighbor_stride must be positive and sort_stride non-negative" );
    if ( c.neighbor_layout != "compressed" && c.neighbor_layout != "dense" )
        fail( "neighbor_layout must be compressed or dense" );
    if ( *c.particles < 1 )
        fail( "particles must be positive" );
    if ( !( c.omega_p > 0.0 ) || c.mode < 0 )
        fail( "omega_p must be positive and mode non-negative" );
    if ( *c.spline_order < 1 || *c.spline_order > 3 )
        fail( "spline_order must be 1, 2 or 3" );
    if ( !( c.picard_tol > 0.0 ) || c.picard_max_iters < 1 )
        fail( "picard_tol and picard_max_iters must be positive" );
    if ( c.charges < 2 || c.charges % 2 != 0 )
        fail( "charges must be even and at least 2" );
    if ( !( c.box_length > 0.0 ) || c.mesh < 2 || !is_power_of_two( c.mesh ) )
        fail( "box_length must be positive and mesh a power of two" );
    if ( c.configurations < 1 || !( c.fd_tol > 0.0 ) )
        fail( "configurations and fd_tol must be positive" );
    if ( sc == "spme-check" && *c.r_cut > 0.5 * c.box_length )
        fail( "r_cut too large for box: must be <= box_length/2" );
    if ( sc == "md" || sc == "layout-bench" )
    {
        const double L = std::cbrt( 4.0 * c.cells * c.cells * c.cells / c.density );
        if ( 2.0 * ( *c.r_cut + c.skin ) >= L )
            fail( "r_cut too large for box: 2(r_cut + skin) must be < box length" );
    }
    return c;
}

inline json to_json( const RunConfig& c )
{
    json j;
    j["subcommand"] = c.subcommand;
    j["seed"] = c.seed;
    j["ranks"] = c.ranks;
    j["vector_length"] = c.vector_length;
    j["vector_lengths"] = c.vector_lengths;
    j["steps"] = c.steps;
    j["dt"] = c.dt ? json( *c.dt ) : json( "auto" );
    j["deterministic"] = c.deterministic;
    j["output"] = c.output;
    j["timing_output"] = c.timing_output;
    j["cells"] = c.cells;
    j["density"] = c.density;
    j["temperature"] = c.temperature;
    j["r_cut"] = c.r_cut ? json( *c.r_cut ) : json( "auto" );
    j["skin"] = c.skin;
    j["neighbor_stride"] = c.neighbor_stride;
    j["sort_stride"] = c.sort_stride;
    j["shift_energy"] = c.shift_energy;
    j["neighbor_layout"] = c.neighbor_layout;
    j["grid"] = c.grid;
    j["lengths"] = c.lengths;
    j["particles"] = c.particles ? json( *c.particles ) : json( "auto" );
    j["omega_p"] = c.omega_p;
    j["beam_speed"] = c.beam_speed;
    j["amplitude"] = c.amplitude;
    j["mode"] = c.mode;
    j["spline_order"] = c.spline_order ? json( *c.spline_order ) : json( "auto" );
    j["filter"] = c.filter;
    j["picard_tol"] = c.picard_tol;
    j["picard_max_iters"] = c.picard_max_iters;
    j["levels"] = c.levels;
    j["fft_grid"] = c.fft_grid;
    j["rank_counts"] = c.rank_counts;
    j["charges"] = c.charges;
    j["box_length"] = c.box_length;
    j["mesh"] = c.mesh;
    j["configurations"] = c.configurations;
    j["fd_tol"] = c.fd_tol;
    return j;
}

//! Parses a JSON document into a resolved configuration.
inline RunConfig parse_config( const std::string& text )
{
    json doc;
    try
    {
        doc = json::parse( text );
    }
    catch ( const json::parse_error& e )
    {
        throw ConfigError( std::string( "invalid JSON: " ) + e.what() );
    }
    return resolve( from_json( doc ) );
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//

//! Shortest round-trip decimal form.
inline std::string fmt( double x )
{
    char buf[64];
    auto r = std::to_chars( buf, buf + sizeof( buf ), x );
    return std::string( buf, r.ptr );
}

inline std::string fmt( long long x ) { return std::to_string( x ); }
inline std::string fmt( int x ) { return std::to_string( x ); }
inline std::string fmt( std::size_t x ) { return std::to_string( x ); }
inline std::string fmt( const std::string& s )
{
    if ( s.find_first_of( ",\"\n\r" ) == std::string::npos )
        return s;
    std::string out = "\"";
    for ( char c : s )
    {
        if ( c == '"' )
            out += '"';
        out += c;
    }
    return out + "\"";
}
inline std::string fmt( const char* s ) { return fmt( std::string( s ) ); }

class CsvTable
{
  public:
    explicit CsvTable( std::vector<std::string> header )
        : _header( std::move( header ) )
    {
    }

    template <class... T>
    void row( const T&... values )
    {
        if ( sizeof...( T ) != _header.size() )
            throw std::logic_error( "CsvTable: column count mismatch" );
        std::string line;
        ( ( line += "," + fmt( values ) ), ... );
        _body += line.substr( 1 ) + "\n";
    }

    //! Header and rows, without the comment line.
    std::string body() const
    {
        std::string h;
        for ( std::size_t i = 0; i < _header.size(); ++i )
            h += ( i ? "," : "" ) + fmt( _header[i] );
        return h + "\n" + _body;
    }

    std::string text( const json& effective ) const
    {
        return "# " + effective.dump() + "\n" + body();
    }

  private:
    std::vector<std::string> _header;
    std::string _body;
};

//! FNV-1a 64-bit digest, as 16 hex digits.
inline std::string checksum( const std::string& s )
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for ( unsigned char c : s )
    {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf( buf, sizeof( buf ), "%016llx", static_cast<unsigned long long>( h ) );
    return buf;
}

inline void write_text( const std::string& path, const std::string& text, std::ostream& out )
{
    if ( path.empty() )
    {
        out << text;
        return;
    }
    std::ofstream f( path, std::ios::binary );
    if ( !f )
        throw ConfigError( "cannot open output file: " + path );
    f << text;
}

//---------------------------------------------------------------------------//
// Subcommands
//---------------------------------------------------------------------------//

inline ExecutionMode exec_mode( const RunConfig& c )
{
    return c.deterministic ? ExecutionMode::Serial : ExecutionMode::Parallel;
}

inline MDConfig md_config( const RunConfig& c )
{
    MDConfig m;
    m.cells = c.cells;
    m.density = c.density;
    m.temperature = c.temperature;
    m.dt = *c.dt;
    m.steps = c.steps;
    m.lj.r_cut = *c.r_cut;
    m.lj.shift_energy = c.shift_energy;
    m.skin = c.skin;
    m.neighbor_stride = c.neighbor_stride;
    m.sort_stride = c.sort_stride;
    m.ranks = c.ranks;
    m.vector_length = static_cast<std::size_t>( c.vector_length );
    m.list_layout = c.neighbor_layout == "dense" ? ListLayout::Dense : ListLayout::Compressed;
    m.mode = exec_mode( c );
    m.seed = c.seed;
    return m;
}

inline PlasmaConfig plasma_config( const RunConfig& c )
{
    PlasmaConfig p;
    p.cells = c.grid;
    p.lengths = c.lengths;
    p.particles = static_cast<std::size_t>( *c.particles );
    p.omega_p = c.omega_p;
    p.beam_speed = c.beam_speed;
    p.amplitude = c.amplitude;
    p.mode = c.mode;
    p.dt = *c.dt;
    p.order = *c.spline_order;
    p.filter = c.filter;
    p.sort_stride = c.sort_stride;
    p.vector_length = static_cast<std::size_t>( c.vector_length );
    p.exec = exec_mode( c );
    p.seed = c.seed;
    return p;
}

struct Output
{
    CsvTable physics{ {} };
    std::optional<CsvTable> timing;
};

inline Output md_output( const std::vector<MDRecord>& records )
{
    Output out{ CsvTable( { "step", "kinetic", "potential", "total", "temperature" } ), {} };
    out.timing.emplace( std::vector<std::string>{ "step", "integrate_ms", "sort_ms", "migrate_ms",
                                                  "halo_ms", "neighbor_ms", "force_ms" } );
    for ( const auto& r : records )
    {
        out.physics.row( r.step, r.kinetic, r.potential, r.total, r.temperature );
        out.timing->row( r.step, r.ms.integrate, r.ms.sort, r.ms.migrate, r.ms.halo,
                         r.ms.neighbor, r.ms.force );
    }
    return out;
}

inline Output run_md( const RunConfig& c ) { return md_output( particula::run_md( md_config( c ) ) ); }

inline Output run_pic( const RunConfig& c, bool implicit )
{
    Output out{ CsvTable( { "step", "kinetic", "field", "total", "picard_iterations",
                            "max_residual" } ),
                {} };
    auto s = make_plasma( plasma_config( c ) );
    auto emit = [&]( const PICDiagnostics& d ) {
        out.physics.row( d.step, d.kinetic, d.field, d.total, d.iterations, d.residual );
    };
    emit( pic_energies( s ) );
    for ( int n = 0; n < c.steps; ++n )
        emit( implicit ? cn_implicit_step( s, c.picard_tol, c.picard_max_iters )
                       : es_explicit_step( s ) );
    return out;
}

inline Output run_sgct( const RunConfig& c )
{
    Output out{ CsvTable( { "level", "particles", "variance_dense", "variance_sgct" } ), {} };
    for ( int level : c.levels )
    {
        const auto r = sgct_variance( level, static_cast<std::size_t>( *c.particles ), c.seed,
                                      exec_mode( c ) );
        out.physics.row( r.level, r.particles, r.variance_dense, r.variance_sgct );
    }
    return out;
}

//! Near-cubic rank grid with product n, largest extent first.
inline Index3 cube_dims( int n )
{
    Index3 best{ n, 1, 1 };
    for ( int a = 1; a <= n; ++a )
        for ( int b = 1; a * b <= n; ++b )
        {
            if ( n % ( a * b ) != 0 )
                continue;
            Index3 d{ n / ( a * b ), b, a };
            if ( d[0] < d[1] || d[1] < d[2] )
                continue;
            if ( d[0] - d[2] < best[0] - best[2] )
                best = d;
        }
    return best;
}

inline std::string dims_string( const Index3& d )
{
    return std::to_string( d[0] ) + "x" + std::to_string( d[1] ) + "x" + std::to_string( d[2] );
}

inline Output run_fft_bench( const RunConfig& c )
{
    Output out{ CsvTable( { "ranks", "rank_dims", "stage", "pairs", "fan_out", "bytes",
                            "cbrt_ranks", "max_rel_error" } ),
                {} };
    ComplexGrid3 g( c.fft_grid );
    std::mt19937_64 rng( c.seed );
    std::uniform_real_distribution<double> u( -1.0, 1.0 );
    for ( auto& z : g.values )
        z = { u( rng ), u( rng ) };
    const auto reference = fft3_serial( g, FftDirection::Forward );
    double ref_max = 0.0;
    for ( const auto& z : reference.values )
        ref_max = std::max( ref_max, std::abs( z ) );

    for ( int n : c.rank_counts )
    {
        const Index3 dims = cube_dims( n );
        auto fabric = decompose( Box::cube( 1.0 ), dims, { true, true, true } );
        PencilPlan plan( fabric, c.fft_grid );
        auto data = scatter_bricks( plan, g );
        fft3_distributed( plan, data, FftDirection::Forward );
        const auto result = gather_bricks( plan, data );
        double err = 0.0;
        for ( std::size_t i = 0; i < result.values.size(); ++i )
            err = std::max( err, std::abs( result.values[i] - reference.values[i] ) );
        for ( const auto& s : message_pair_count( plan ) )
            out.physics.row( n, dims_string( dims ), to_string( s.from ) + "->" + to_string( s.to ),
                             s.pairs, s.fan_out, s.bytes, std::cbrt( static_cast<double>( n ) ),
                             err / ref_max );
    }
    return out;
}

inline Output run_layout_bench( const RunConfig& c )
{
    Output out{ CsvTable( { "app", "vector_length", "phase", "wall_ms", "physics_checksum" } ),
                {} };
    auto sweep = c.vector_lengths;
    const int n_md = 4 * c.cells * c.cells * c.cells;
    sweep.push_back( n_md );
    for ( int V : sweep )
    {
        auto rc = c;
        rc.vector_length = V;
        const auto records = particula::run_md( md_config( rc ) );
        MDPhaseTimes total;
        for ( const auto& r : records )
        {
            total.integrate += r.ms.integrate;
            total.sort += r.ms.sort;
            total.migrate += r.ms.migrate;
            total.halo += r.ms.halo;
            total.neighbor += r.ms.neighbor;
            total.force += r.ms.force;
        }
        const auto sum = checksum( md_output( records ).physics.body() );
        const std::pair<const char*, double> phases[] = {
            { "integrate", total.integrate }, { "sort", total.sort },
            { "migrate", total.migrate },     { "halo", total.halo },
            { "neighbor", total.neighbor },   { "force", total.force } };
        for ( const auto& [name, ms] : phases )
            out.physics.row( "md", V, name, ms, sum );
    }

    auto pc = c;
    pc.dt = 0.1;
    pc.steps = std::min( c.steps, 20 );
    pc.particles = std::min<long long>( *c.particles, 20000 );
    pc.grid = { 32, 32, 1 };
    sweep = c.vector_lengths;
    sweep.push_back( static_cast<int>( *pc.particles ) );
    for ( int V : sweep )
    {
        pc.vector_length = V;
        const auto start = std::chrono::steady_clock::now();
        const auto pic = run_pic( pc, false );
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start )
                              .count();
        out.physics.row( "pic", V, "step", ms, checksum( pic.physics.body() ) );
    }
    return out;
}

//! Random neutral configuration of n charges +-1 in a cube of edge L.
inline ParticleSet random_charges( int n, double L, std::mt19937_64& rng )
{
    ParticleSet s( { { "x", ScalarKind::Float64, { 3 } }, { "q", ScalarKind::Float64, {} } }, 16,
                   static_cast<std::size_t>( n ) );
    auto x = s.slice<double>( "x" );
    auto q = s.slice<double>( "q" );
    std::uniform_real_distribution<double> u( 0.0, L );
    for ( int i = 0; i < n; ++i )
    {
        for ( int d = 0; d < 3; ++d )
            x( i, d ) = u( rng );
        q( i ) = i % 2 ? -1.0 : 1.0;
    }
    return s;
}

inline Output run_spme_check( const RunConfig& c, std::ostream& warn = std::cerr )
{
    Output out{ CsvTable( { "configuration", "mesh", "order", "alpha", "max_force_error",
                            "energy_rel_error", "fd_consistency", "verdict" } ),
                {} };
    const double L = c.box_length;
    const Box box = Box::cube( L );
    EwaldParams p;
    p.r_cut = *c.r_cut;
    p.alpha = default_alpha( p.r_cut );
    p.mesh = { c.mesh, c.mesh, c.mesh };
    p.order = *c.spline_order;
    EwaldParams o = p;
    o.r_cut = 0.8 * L;
    o.k_max = static_cast<int>( std::ceil( 2.0 * p.alpha * 6.5 * L / ( 2 * std::numbers::pi ) ) );

    std::mt19937_64 rng( c.seed );
    for ( int k = 0; k < c.configurations; ++k )
    {
        auto s = random_charges( c.charges, L, rng );
        auto x = s.slice<double>( "x" );
        auto q = s.slice<double>( "q" );
        const auto a = spme( x, q, box, p );
        const auto b = ewald_direct( x, q, box, o );
        double ferr = 0.0;
        for ( std::size_t i = 0; i < a.forces.size(); ++i )
            for ( int d = 0; d < 3; ++d )
                ferr = std::max( ferr, std::abs( a.forces[i][d] - b.forces[i][d] ) );
        const double eerr = std::abs( a.energy - b.energy ) / std::abs( b.energy );
        const double fd = spme_force_consistency( x, q, box, p, { 0, 1 } );
        out.physics.row( k, c.mesh, p.order, p.alpha, ferr, eerr, fd,
                         fd < c.fd_tol ? "ok" : "mesh_too_coarse" );
        if ( !( fd < c.fd_tol ) )
            warn << "spme-check: configuration " << k << " fails the finite-difference check ("
                      << fmt( fd ) << " >= " << fmt( c.fd_tol ) << "); mesh " << c.mesh
                      << " too coarse\n";
    }
    return out;
}

//! Runs a resolved configuration and writes its CSV files.
inline void run( const RunConfig& c, std::ostream& stdout_sink = std::cout,
                 std::ostream& warn = std::cerr )
{
    Output out{ CsvTable( {} ), {} };
    const auto& sc = c.subcommand;
    if ( sc == "md" )
        out = run_md( c );
    else if ( sc == "pic" || sc == "pic-implicit" )
        out = run_pic( c, sc == "pic-implicit" );
    else if ( sc == "sgct" )
        out = run_sgct( c );
    else if ( sc == "fft-bench" )
        out = run_fft_bench( c );
    else if ( sc == "layout-bench" )
        out = run_layout_bench( c );
    else
        out = run_spme_check( c, warn );
    const auto effective = to_json( c );
    write_text( c.output, out.physics.text( effective ), stdout_sink );
    if ( out.timing && !c.timing_output.empty() )
        write_text( c.timing_output, out.timing->text( effective ), stdout_sink );
}

//---------------------------------------------------------------------------//
// Flags
//---------------------------------------------------------------------------//

namespace detail
{

inline std::vector<std::string> split_list( const std::string& s )
{
    std::vector<std::string> out;
    std::string cur;
    for ( char ch : s )
    {
        if ( ch == ',' || ch == ' ' )
        {
            if ( !cur.empty() )
                out.push_back( cur );
            cur.clear();
        }
        else
            cur += ch;
    }
    if ( !cur.empty() )
        out.push_back( cur );
    return out;
}

inline json parse_scalar( const std::string& text, Kind k, const std::string& key )
{
    auto bad = [&]() -> json {
        throw ConfigError( "type mismatch for key " + key + ": expected " + kind_name( k ) );
    };
    if ( k == Kind::String )
        return text;
    if ( k == Kind::Bool )
    {
        if ( text == "true" || text == "1" )
            return true;
        if ( text == "false" || text == "0" )
            return false;
        return bad();
    }
    if ( k == Kind::Double )
    {
        double v = 0.0;
        auto r = std::from_chars( text.data(), text.data() + text.size(), v );
        if ( r.ec != std::errc() || r.ptr != text.data() + text.size() )
            return bad();
        return v;
    }
    if ( k == Kind::UInt64 )
    {
        std::uint64_t v = 0;
        auto r = std::from_chars( text.data(), text.data() + text.size(), v );
        if ( r.ec != std::errc() || r.ptr != text.data() + text.size() )
            return bad();
        return v;
    }
    long long v = 0;
    auto r = std::from_chars( text.data(), text.data() + text.size(), v );
    if ( r.ec != std::errc() || r.ptr != text.data() + text.size() )
        return bad();
    return v;
}

//! Flag text to a JSON value of the key's kind; lists are comma separated.
inline json parse_flag( const std::string& text, const KeySpec& spec )
{
    if ( spec.kind == Kind::Int3 || spec.kind == Kind::Double3 || spec.kind == Kind::IntList )
    {
        const Kind elem = spec.kind == Kind::Double3 ? Kind::Double : Kind::Int;
        json arr = json::array();
        for ( const auto& part : split_list( text ) )
            arr.push_back( parse_scalar( part, elem, spec.key ) );
        return arr;
    }
    return parse_scalar( text, spec.kind, spec.key );
}

inline std::string read_file( const std::string& path )
{
    std::ifstream f( path, std::ios::binary );
    if ( !f )
        throw ConfigError( "cannot read config file: " + path );
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace detail

//! Command-line entry point; returns the process exit code.
inline int cli_main( int argc, const char* const* argv, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr )
{
    const json defaults = to_json( RunConfig{} );
    CLI::App app{ "Particle simulation proxy applications.\n"
                  "Settings come from --config (strict JSON) and flags; flags win." };
    std::string positional, config_path;
    bool deterministic = false, parallel = false;
    app.add_option( "command", positional,
                    "md | pic | pic-implicit | sgct | fft-bench | layout-bench | spme-check" );
    app.add_option( "--config", config_path, "JSON config file" );
    app.add_flag( "--deterministic", deterministic, "serial kernels (default)" );
    app.add_flag( "--parallel", parallel, "parallel kernels; PARTICULA_THREADS caps workers" );
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;
    for ( const auto& s : key_specs() )
    {
        if ( std::string( s.key ) == "deterministic" )
            continue;
        const auto& d = defaults[s.key];
        const std::string shown = d.is_string() ? d.get<std::string>() : d.dump();
        options[s.key] = app.add_option( "--" + kebab( s.key ), raw[s.key],
                                         std::string( s.help ) + " (default: " +
                                             ( shown.empty() ? "\"\"" : shown ) + ")" );
    }

    try
    {
        app.parse( argc, argv );
    }
    catch ( const CLI::CallForHelp& )
    {
        out << app.help();
        return 0;
    }
    catch ( const CLI::ParseError& e )
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try
    {
        json doc = json::object();
        if ( !config_path.empty() )
        {
            try
            {
                doc = json::parse( detail::read_file( config_path ) );
            }
            catch ( const json::parse_error& e )
            {
                throw ConfigError( std::string( "invalid JSON: " ) + e.what() );
            }
            if ( !doc.is_object() )
                throw ConfigError( "config must be a JSON object" );
        }
        for ( const auto& s : key_specs() )
            if ( options.count( s.key ) && options[s.key]->count() > 0 )
                doc[s.key] = detail::parse_flag( raw[s.key], s );
        if ( !positional.empty() )
            doc["subcommand"] = positional;
        if ( deterministic && parallel )
            throw ConfigError( "--deterministic and --parallel are exclusive" );
        if ( deterministic || parallel )
            doc["deterministic"] = deterministic;
        run( resolve( from_json( doc ) ), out, err );
        return 0;
    }
    catch ( const ConvergenceError& e )
    {
        err << "error: " << e.what() << " (iterations " << e.iterations() << ", residual "
            << fmt( e.residual() ) << ")\n";
        return 4;
    }
    catch ( const InvariantViolation& e )
    {
        err << "error: " << e.what() << "\n";
        return 3;
    }
    catch ( const std::invalid_argument& e )
    {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    catch ( const std::out_of_range& e )
    {
        err << "error: " << e.what() << "\n";
        return 3;
    }
    catch ( const std::exception& e )
    {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace cli
} // namespace particula

#endif // PARTICULA_CLI_HPP
