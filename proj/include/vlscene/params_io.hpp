#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "vlscene/encoders.hpp"
#include "vlscene/vleb.hpp"

namespace vlscene {

// Encoder parameters as a VLEB bundle of kind "params": rows are w_vision
// (f rows), then token_table (vocab rows), then w_text (d rows), all of width d.
Bundle params_to_bundle(const EncoderParams& params);
EncoderParams params_from_bundle(const Bundle& bundle);

// "step,loss" header then one row per step, step numbered from 0.
std::string loss_trace_csv(std::span<const double> trace);

}  // namespace vlscene
