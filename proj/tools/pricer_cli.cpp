#include "pricer/cli.hpp"

int main(int argc, char** argv) { return pricer::cli_main(argc, argv); }
