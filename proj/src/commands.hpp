#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "models.hpp"
#include "optim.hpp"
#include "srcgan.hpp"

namespace srforge::cli {

/// Each command reads its settings from `cfg` and writes its result table or
/// summary to `out`. Progress notes go to `log`. Failures throw srforge::Error
/// carrying the exit code.
void cmd_prepare_data(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_train_sr(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_eval_sr(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_upscale(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_count_params(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_train_srcgan(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_eval_srcgan(const RunConfig& cfg, std::ostream& out, std::ostream& log);
void cmd_train_classifier(const RunConfig& cfg, std::ostream& out, std::ostream& log);
/// Writes a freshly initialised (or all-zero with init=zero) SR checkpoint to `out`.
void cmd_init_model(const RunConfig& cfg, std::ostream& out, std::ostream& log);

/// Model built from the shape settings, initialised per `init` and `seed`.
io::Checkpoint initial_sr_checkpoint(const RunConfig& cfg);

models::ModelConfig model_config(const RunConfig& cfg);
optim::SgdConfig sgd_config(const RunConfig& cfg);
optim::LrSchedule lr_schedule(const RunConfig& cfg);
srcgan::GanConfig gan_settings(const RunConfig& cfg);

/// CSV rows: per width, block and whole-model counts for the grouped and the
/// unbranched design, with and without bias terms.
std::string count_params_table(const std::vector<std::uint32_t>& widths, const models::ModelConfig& base);

/// Fixed-format number used in every CSV the commands write.
std::string csv_number(double v);

}  // namespace srforge::cli
