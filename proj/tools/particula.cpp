#include <particula/cli.hpp>

int main( int argc, char** argv ) { return particula::cli::cli_main( argc, argv ); }
