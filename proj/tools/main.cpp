#include "emtl/cli.hpp"

int main(int argc, char** argv) { return emtl::run_cli(argc, argv); }
