#pragma once

#include "gradorder/sgd_engine.hpp"

#include <string>

namespace gradorder {

// Round-trip formatting for csv output (%.17g).
std::string format_double(double v);

// One row per epoch boundary. Plain runs use
//   q,grad_norm_sq,dist_to_opt,order_error_2,order_error_inf,param_dev,extra_grads
// and federated runs append round,fl_order_error_2,fl_order_error_inf.
std::string trace_csv(const RunTrace<double>& trace);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

void write_trace_csv(const std::string& path, const RunTrace<double>& trace);

}  // namespace gradorder
