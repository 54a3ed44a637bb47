#include "gfar/io.hpp"

int main(int argc, char** argv) { return gfar::cli_main(argc, argv); }
