#include "charflow/model.hpp"

#include <cmath>
#include <sstream>

namespace charflow {

ModelParams validate_params(const RawParams& raw) {
  if (!std::isfinite(raw.lambda) || raw.lambda != std::floor(raw.lambda)) {
    std::ostringstream msg;
    msg << "lambda must be an integer, got " << raw.lambda;
    throw Error(ErrorCode::NonIntegerLambda, msg.str());
  }
  if (raw.lambda < 0) {
    std::ostringstream msg;
    msg << "lambda must be >= 0, got " << raw.lambda;
    throw Error(ErrorCode::NegativeLambda, msg.str());
  }
  if (!(raw.L > 0.0) || !std::isfinite(raw.L)) {
    std::ostringstream msg;
    msg << "domain half-width L must be positive, got " << raw.L;
    throw Error(ErrorCode::DomainTooSmall, msg.str());
  }
  if (!std::isfinite(raw.N) || raw.N != std::floor(raw.N) || raw.N < 16 || raw.N > 1 << 26) {
    std::ostringstream msg;
    msg << "grid size N must be an integer >= 16, got " << raw.N;
    throw Error(ErrorCode::GridTooCoarse, msg.str());
  }
  ModelParams p;
  p.lambda = static_cast<int>(raw.lambda);
  p.k = 2 * (p.lambda + 1);
  p.L = raw.L;
  p.N = static_cast<int>(raw.N);
  return p;
}

CharGrid make_grid(double y_min, double y_max, int n) {
  if (n < 2 || !(y_max > y_min)) throw Error(ErrorCode::GridTooCoarse, "grid needs two nodes and y_max > y_min");
  CharGrid g;
  g.y_min = y_min;
  g.dy = (y_max - y_min) / (n - 1);
  g.nodes = ArrayXd::LinSpaced(n, 0.0, n - 1) * g.dy + y_min;
  g.y_max = g.nodes[n - 1];
  return g;
}

}  // namespace charflow
