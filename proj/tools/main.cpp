#include "pnph/cli.hpp"

int main(int argc, char** argv) { return pnph::run_cli(argc, argv); }
