#include "fullstab/cli.hpp"

int main(int argc, char** argv) { return fullstab::cli::run(argc, argv); }
