#pragma once

#include "gradorder/serialization.hpp"

#include <string>

namespace gradorder {

// Median line plus min-max band per orderer on a log-y scale, from the
// summary json produced by run_experiment. The output depends only on the
// summary contents, so reruns are byte-identical.
std::string render_band_chart(const Json& summary, const std::string& metric);

void emit_plot(const std::string& summary_path, const std::string& metric,
               const std::string& out_path);

}  // namespace gradorder
