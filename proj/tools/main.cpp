#include "d4lcn/cli.hpp"

int main(int argc, char** argv) { return d4lcn::cli::run(argc, argv); }
