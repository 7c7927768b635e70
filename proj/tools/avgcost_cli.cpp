#include "avgcost/cli.hpp"

int main(int argc, char** argv) { return avgcost::cli_main(argc, argv); }
