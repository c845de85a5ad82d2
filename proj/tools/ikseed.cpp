#include "ikseed/cli.hpp"

int main(int argc, char** argv) { return ikseed::run_cli(argc, argv); }
