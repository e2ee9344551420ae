#include "pilot/bench.hpp"

int main(int argc, char** argv) { return pilot::run_cli(argc, argv); }
