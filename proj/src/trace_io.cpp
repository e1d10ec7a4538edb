#include "gradorder/trace_io.hpp"

#include "gradorder/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace gradorder {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trace_csv(const RunTrace<double>& trace) {
  std::ostringstream out;
  out << "q,grad_norm_sq,dist_to_opt,order_error_2,order_error_inf,param_dev,extra_grads";
  if (trace.fl) out << ",round,fl_order_error_2,fl_order_error_inf";
  out << '\n';
  for (const auto& r : trace.rows) {
    out << r.q << ',' << format_double(r.grad_norm_sq) << ',' << format_double(r.dist_to_opt)
        << ',' << format_double(r.order_error_2) << ',' << format_double(r.order_error_inf) << ','
        << format_double(r.param_dev) << ',' << r.extra_grads;
    if (trace.fl)
      out << ',' << r.round << ',' << format_double(r.fl_order_error_2) << ','
          << format_double(r.fl_order_error_inf);
    out << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_trace_csv(const std::string& path, const RunTrace<double>& trace) {
  write_text_file(path, trace_csv(trace));
}

}  // namespace gradorder
