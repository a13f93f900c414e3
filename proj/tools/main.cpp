#include "dwiboot/cli.hpp"

int main(int argc, char** argv) { return dwiboot::cli::run(argc, argv); }
