#pragma once

#include <string>
#include <utility>
#include <vector>

#include "swinfsr/model.hpp"
#include "swinfsr/training.hpp"

namespace swinfsr {

// Flat key=value config file ('#' comments, blank lines allowed).
// Unknown keys are rejected so typos cannot silently fall back to
// defaults.  Model keys mirror the checkpoint config echo.
std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path);
std::pair<SwinFsrConfig, TrainConfig> parse_run_config(const std::string& path);

}  // namespace swinfsr
