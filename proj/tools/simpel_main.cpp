#include "simpel/cli.hpp"

int main(int argc, char** argv) { return simpel::run_cli(argc, argv); }
