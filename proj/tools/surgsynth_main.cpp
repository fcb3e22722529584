#include "surgsynth/cli.hpp"

int main(int argc, char **argv) { return surgsynth::cli_dispatch(argc, argv); }
