#include "nascur/cli.hpp"

int main(int argc, char** argv) { return nascur::run_cli(argc, argv); }
