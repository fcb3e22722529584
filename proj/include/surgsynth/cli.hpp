#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace surgsynth {

// Subcommands: generate, eval, stats, validate, pnp, serve. Returns 0 on
// success, 1 on a domain error, 2 on a usage error (synopsis on err).
int cli_dispatch(int argc, char **argv);
int cli_dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace surgsynth
