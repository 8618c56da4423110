#include "attribex/cli.hpp"

int main(int argc, char** argv) { return attribex::run_cli(argc, argv); }
