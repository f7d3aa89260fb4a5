// SPDX-License-Identifier: Apache-2.0

#include "lioncub/costmodel.hpp"

#include <cmath>
#include <ostream>

#include "lioncub/errors.hpp"

namespace lioncub::costmodel {

std::string to_string(Algo a) {
  switch (a) {
    case Algo::kPsNaive: return "ps_naive";
    case Algo::kPsEfficient: return "ps_efficient";
    case Algo::kDirectAllreduce: return "direct_allreduce";
    case Algo::kCompressed1Bit: return "compressed_1bit";
  }
  return "?";
}

void CostParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) {
    throw ConfigError("cost model: alpha and beta must be >= 0");
  }
  if (!(workers >= 2.0)) throw ConfigError("cost model: need P >= 2");
  if (!(params >= 1.0)) throw ConfigError("cost model: need N >= 1");
  if (!(word_bits >= 1.0)) throw ConfigError("cost model: need b >= 1");
}

Cost cost(Algo algo, const CostParams& cp) {
  cp.validate();
  const double p = cp.workers;
  const double n = cp.params;
  const double b = cp.word_bits;
  const double lg = std::log2(p);
  const double frac = (p - 1.0) / p;
  Cost c;
  switch (algo) {
    case Algo::kPsNaive:
      c.latency_s = 2.0 * (p - 1.0) * cp.alpha;
      c.bandwidth_s = 2.0 * p * n * b * cp.beta;
      break;
    case Algo::kPsEfficient:
      c.latency_s = 2.0 * lg * cp.alpha;
      c.bandwidth_s = 3.0 * frac * n * b * cp.beta;
      break;
    case Algo::kDirectAllreduce:
      c.latency_s = 2.0 * lg * cp.alpha;
      c.bandwidth_s = 2.0 * frac * n * (lg + 1.0) * cp.beta;
      break;
    case Algo::kCompressed1Bit:
      c.latency_s = (p - 1.0 + lg) * cp.alpha;
      c.bandwidth_s = (1.0 + frac) * n * cp.beta;
      break;
  }
  c.total_s = c.latency_s + c.bandwidth_s;
  return c;
}

std::vector<SweepRow> sweep(const Grid& grid) {
  if (grid.workers.empty() || grid.params.empty() || grid.alphas.empty() ||
      grid.betas.empty()) {
    throw ConfigError("cost model sweep: empty grid");
  }
  std::vector<SweepRow> rows;
  for (double p : grid.workers) {
    for (double n : grid.params) {
      for (double a : grid.alphas) {
        for (double be : grid.betas) {
          const CostParams cp{a, be, p, n, grid.word_bits};
          const std::size_t first = rows.size();
          std::size_t best = first;
          for (Algo algo : kAllAlgos) {
            rows.push_back(SweepRow{algo, cp, cost(algo, cp), false});
            if (rows.back().cost.total_s < rows[best].cost.total_s) {
              best = rows.size() - 1;
            }
          }
          rows[best].is_argmin = true;
        }
      }
    }
  }
  return rows;
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  const auto old_precision = os.precision(17);
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(r.algo) << ',' << r.point.workers << ',' << r.point.params
       << ',' << r.point.alpha << ',' << r.point.beta << ','
       << r.cost.latency_s << ',' << r.cost.bandwidth_s << ','
       << r.cost.total_s << ',' << (r.is_argmin ? 1 : 0) << '\n';
  }
  os.precision(old_precision);
}

}  // namespace lioncub::costmodel
