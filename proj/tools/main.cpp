#include "vedge/cli.hpp"

int main(int argc, char** argv) { return vedge::cli::run(argc, argv); }
