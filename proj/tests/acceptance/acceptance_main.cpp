#include <cstdio>
#include <cstring>
#include <optional>
#include <string>

#include "cutoff/acceptance.hpp"

int main(int argc, char** argv) {
  cutoff::acceptance::Options opts;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) opts.quick = true;
    else if (std::strncmp(argv[i], "--corrupt=", 10) == 0) opts.corrupt = std::stoi(argv[i] + 10);
  }
  std::size_t failed = 0;
  cutoff::acceptance::run_all(opts, [&](const cutoff::acceptance::Result& r) {
    std::printf("%s\n", cutoff::acceptance::format_line(r).c_str());
    std::fflush(stdout);
    failed += r.passed ? 0 : 1;
  });
  std::printf("%s: %zu criteria failed\n", failed ? "FAILED" : "ALL PASSED", failed);
  return failed ? 1 : 0;
}
