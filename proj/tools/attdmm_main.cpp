#include "attdmm/cli/commands.hpp"

int main(int argc, char** argv) { return attdmm::cli::dispatch(argc, argv); }
