#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cutoff/parallel.hpp"

namespace cutoff::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  bool quick = false;               // reduced sizes for a fast smoke run
  std::optional<int> corrupt;       // criterion whose tolerance is replaced by an impossible one
  Execution ex = Execution::parallel;
  std::uint64_t seed = 20240601;
};

struct Criterion {
  int id;
  std::string name;
  bool in_quick;
  std::function<Result(const Options&)> run;
};

const std::vector<Criterion>& criteria();

// Runs every criterion (or the quick subset); `sink` sees each result as it completes.
std::vector<Result> run_all(const Options& options, const std::function<void(const Result&)>& sink = {});

std::string format_line(const Result& r);

}  // namespace cutoff::acceptance
