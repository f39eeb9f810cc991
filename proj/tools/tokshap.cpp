#include "tokshap/cli.hpp"

int main(int argc, char** argv) { return tokshap::cli::dispatch(argc, argv); }
