#include <dynakernel/cli.hpp>

int main(int argc, char** argv) { return dynakernel::cli::run(argc, argv); }
