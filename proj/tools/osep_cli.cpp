#include "osep/harness.hpp"

int main(int argc, char** argv) { return osep::cli_main(argc, argv); }
