/*
 * Copyright 2026 The nestq Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nestq/error_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

namespace nestq {

namespace {

using exact::from_double;
using exact::from_int;

mpq_class deq(std::int64_t code, const QuantParams& p) { return from_double(p.offset) + from_double(p.scale) * from_int(code); }

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string describe(const QuantParams& p) {
  return "{scale=" + hex(p.scale) + ",offset=" + hex(p.offset) + ",bits=" + std::to_string(p.bits) + "}";
}

std::string describe(const IntOpConstants& c) {
  std::ostringstream os;
  os << to_string(c.role) << " F=" << c.frac_bits << " lhs=" << describe(c.lhs) << " rhs=" << describe(c.rhs)
     << " out=" << describe(c.out) << " k=[" << c.k[0] << "," << c.k[1] << "," << c.k[2] << "," << c.k[3] << "]";
  if (c.role == OpRole::Dot) os << " N=" << c.length;
  return os.str();
}

template <class T>
std::string join(std::span<const T> v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::array<mpq_class, 4> exact_ratios(const IntOpConstants& c) {
  const mpq_class d1 = from_double(c.lhs.scale), d2 = from_double(c.rhs.scale), dy = from_double(c.out.scale);
  const mpq_class m1 = from_double(c.lhs.offset), m2 = from_double(c.rhs.offset), my = from_double(c.out.offset);
  switch (c.role) {
    case OpRole::Add:
      if (c.unary) return {d1 / dy, mpq_class(0), (m1 - my) / dy, mpq_class(0)};
      return {d1 / dy, d2 / dy, (m1 + m2 - my) / dy, mpq_class(0)};
    case OpRole::Mul: return {d1 * d2 / dy, d1 * m2 / dy, d2 * m1 / dy, (m1 * m2 - my) / dy};
    case OpRole::Dot: {
      const mpq_class n = from_int(static_cast<std::int64_t>(c.length));
      return {d1 * d2 / dy, d1 * m2 / dy, d2 * m1 / dy, (n * m1 * m2 - my) / dy};
    }
  }
  fail(ErrorCode::Internal, "unknown operator role");
}

std::array<mpq_class, 4> default_magnitudes(const IntOpConstants& c) {
  const mpq_class a = from_int(c.lhs.max_code());
  const mpq_class b = c.unary ? mpq_class(0) : from_int(c.rhs.max_code());
  switch (c.role) {
    case OpRole::Add: return {a, b, mpq_class(1), mpq_class(0)};
    case OpRole::Mul: return {a * b, a, b, mpq_class(1)};
    case OpRole::Dot: {
      const mpq_class n = from_int(static_cast<std::int64_t>(c.length));
      return {n * a * b, n * a, n * b, mpq_class(1)};
    }
  }
  fail(ErrorCode::Internal, "unknown operator role");
}

std::array<mpq_class, 4> scalar_magnitudes(const IntOpConstants& c, std::int64_t q1, std::int64_t q2) {
  const mpq_class a = exact::abs(from_int(q1)), b = exact::abs(from_int(q2));
  if (c.role == OpRole::Mul) return {a * b, a, b, mpq_class(1)};
  return {a, b, mpq_class(1), mpq_class(0)};
}

std::array<mpq_class, 4> dot_magnitudes(std::span<const QValue> xq, std::span<const QValue> wq) {
  std::uint64_t s1 = 0, s2 = 0, s3 = 0;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    s1 += static_cast<std::uint64_t>(xq[i]) * wq[i];
    s2 += xq[i];
    s3 += wq[i];
  }
  auto z = [](std::uint64_t v) { return mpq_class(mpz_class(static_cast<unsigned long>(v))); };
  return {z(s1), z(s2), z(s3), mpq_class(1)};
}

int rescale_shift_for(const IntOpConstants& c, const AccPolicy& acc) {
  if (c.role != OpRole::Dot || !acc.rescale) return 0;
  const int needed = required_accumulator_bits(c.lhs.bits, c.rhs.bits, c.length);
  return std::max(0, needed - acc.working_bits);
}

ErrorBound op_error_bound(const IntOpConstants& c, const std::array<mpq_class, 4>& magnitudes, int rescale_shift) {
  ErrorBound e;
  e.role = c.role;
  e.terms = c.role == OpRole::Add ? 3 : 4;
  const auto ratios = exact_ratios(c);
  const mpq_class unit = exact::pow2(-c.frac_bits);
  for (int i = 0; i < e.terms; ++i) {
    e.delta[i] = ratios[i] - from_int(c.k[i]) * unit;
    e.magnitude[i] = magnitudes[i];
    e.constant_term += exact::abs(e.delta[i]) * magnitudes[i];
  }
  e.rounding_term = c.frac_bits > 0 ? mpq_class(1, 2) : mpq_class(0);
  if (c.role == OpRole::Dot && rescale_shift > 0) {
    e.rescale_term = exact::pow2(rescale_shift - 1) * exact::abs(from_int(c.k[0])) * unit;
  }
  return e;
}

ErrorBound op_error_bound(const IntOpConstants& c) { return op_error_bound(c, default_magnitudes(c), 0); }

ErrorBound fused_dot_bias_bound(const IntOpConstants& dot, const std::array<mpq_class, 4>& mags, int rescale_shift,
                                const IntOpConstants& bias_add, std::int64_t bias_code) {
  require(dot.role == OpRole::Dot && bias_add.role == OpRole::Add, ErrorCode::InvalidArgument,
          "fused_dot_bias_bound: expects dot and add constants");
  const ErrorBound d = op_error_bound(dot, mags, rescale_shift);
  const auto dot_ratios = exact_ratios(dot);
  mpq_class dot_max;
  for (int i = 0; i < 4; ++i) dot_max += exact::abs(dot_ratios[i]) * mags[i];
  const auto add_ratios = exact_ratios(bias_add);
  const mpq_class unit = exact::pow2(-bias_add.frac_bits);
  ErrorBound e;
  e.role = OpRole::Dot;
  e.terms = 4;
  e.delta = d.delta;
  e.magnitude = d.magnitude;
  const mpq_class lhs_gain = exact::abs(from_int(bias_add.k[0])) * unit;
  const mpq_class d0 = add_ratios[0] - from_int(bias_add.k[0]) * unit;
  const mpq_class d1 = add_ratios[1] - from_int(bias_add.k[1]) * unit;
  const mpq_class d2 = add_ratios[2] - from_int(bias_add.k[2]) * unit;
  e.constant_term = lhs_gain * d.constant_term + exact::abs(d0) * dot_max +
                    exact::abs(d1) * exact::abs(from_int(bias_code)) + exact::abs(d2);
  e.rounding_term = dot.frac_bits + bias_add.frac_bits > 0 ? mpq_class(1, 2) : mpq_class(0);
  e.rescale_term = lhs_gain * d.rescale_term;
  return e;
}

mpq_class shift_error(std::int64_t q, int n, int b) {
  require(n >= kMinBits && n <= kMaxBits && b >= 1 && b <= n, ErrorCode::InvalidArgument,
          "shift_error: need 1 <= b <= n <= 16");
  require(q >= 0 && q < (std::int64_t{1} << n), ErrorCode::InvalidArgument, "shift_error: code outside [0, 2^n - 1]");
  const mpq_class v = from_int(q) * exact::pow2(-(n - b));
  return v - mpq_class(exact::round_half_away(v));
}

mpq_class exact_add(std::int64_t q1, std::int64_t q2, const IntOpConstants& c) {
  require(c.role == OpRole::Add, ErrorCode::InvalidArgument, "exact_add: not add constants");
  mpq_class sum = deq(q1, c.lhs);
  if (!c.unary) sum += deq(q2, c.rhs);
  return (sum - from_double(c.out.offset)) / from_double(c.out.scale);
}

mpq_class exact_mul(std::int64_t q1, std::int64_t q2, const IntOpConstants& c) {
  require(c.role == OpRole::Mul, ErrorCode::InvalidArgument, "exact_mul: not mul constants");
  return (deq(q1, c.lhs) * deq(q2, c.rhs) - from_double(c.out.offset)) / from_double(c.out.scale);
}

mpq_class exact_dot(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c) {
  require(c.role == OpRole::Dot, ErrorCode::InvalidArgument, "exact_dot: not dot constants");
  require(xq.size() == wq.size() && xq.size() == c.length, ErrorCode::Shape, "exact_dot: length mismatch");
  // sum (mx + dx qx)(mw + dw qw), expanded over exact integer sums.
  const auto s = dot_magnitudes(xq, wq);
  const mpq_class dx = from_double(c.lhs.scale), dw = from_double(c.rhs.scale);
  const mpq_class mx = from_double(c.lhs.offset), mw = from_double(c.rhs.offset);
  const mpq_class n = from_int(static_cast<std::int64_t>(xq.size()));
  const mpq_class total = dx * dw * s[0] + dx * mw * s[1] + dw * mx * s[2] + n * mx * mw;
  return (total - from_double(c.out.offset)) / from_double(c.out.scale);
}

mpq_class clip_exact(const mpq_class& v, int bits) {
  return exact::clamp(v, mpq_class(0), from_int((std::int64_t{1} << bits) - 1));
}

std::int64_t exact_requantize(std::int64_t q, const QuantParams& from, const QuantParams& to) {
  const mpq_class v = (deq(q, from) - from_double(to.offset)) / from_double(to.scale);
  const mpz_class r = exact::round_half_away(v);
  const mpz_class top = (std::int64_t{1} << to.bits) - 1;
  if (r < 0) return 0;
  if (r > top) return exact::to_int64(top);
  return exact::to_int64(r);
}

std::string to_string(VerifyOp op) {
  switch (op) {
    case VerifyOp::Add: return "add";
    case VerifyOp::Mul: return "mul";
    case VerifyOp::Dot: return "dot";
    case VerifyOp::Shift: return "shift";
  }
  return "unknown";
}

VerifyOp verify_op_from_string(std::string_view s) {
  if (s == "add") return VerifyOp::Add;
  if (s == "mul") return VerifyOp::Mul;
  if (s == "dot") return VerifyOp::Dot;
  if (s == "shift") return VerifyOp::Shift;
  fail(ErrorCode::InvalidArgument, "unknown verify op '" + std::string(s) + "'");
}

namespace {

class Recorder {
 public:
  explicit Recorder(VerifyReport& r) : r_(r) {}

  template <class Describe>
  void record(const mpq_class& signed_err, const mpq_class& bound, bool exhaustive, Describe&& what) {
    ++r_.cases;
    ++(exhaustive ? r_.exhaustive_cases : r_.random_cases);
    const mpq_class err = exact::abs(signed_err);
    signed_sum_ += signed_err.get_d();
    if (err > bound) {
      ++r_.violations;
      if (r_.violating.size() < 5) r_.violating.push_back(what() + " error=" + err.get_str() + " bound=" + bound.get_str());
    }
    if (r_.cases == 1 || err > max_err_) {
      max_err_ = err;
      r_.max_abs_error = err.get_d();
      r_.worst_case = what();
    }
    r_.max_bound = std::max(r_.max_bound, bound.get_d());
    if (sgn(bound) > 0) r_.max_ratio = std::max(r_.max_ratio, mpq_class(err / bound).get_d());
  }

  void mismatch(const std::string& what) {
    ++r_.violations;
    if (r_.violating.size() < 5) r_.violating.push_back(what);
  }

  void degenerate() { ++r_.degenerate_cases; }

  void finish() { r_.mean_signed_error = r_.cases ? signed_sum_ / static_cast<double>(r_.cases) : 0.0; }

 private:
  VerifyReport& r_;
  mpq_class max_err_;
  double signed_sum_ = 0.0;
};

struct Sampler {
  std::mt19937_64 rng;
  const SamplerConfig& cfg;

  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng); }

  QuantParams params(int bits, bool zero_offset) {
    const double scale = std::ldexp(uniform(1.0, 2.0), uniform_int(-10, 2));
    const double offset = zero_offset ? 0.0 : uniform(-1.0, 1.0) * std::ldexp(scale, bits);
    return QuantParams{scale, offset, bits, bits};
  }

  QuantParams params(int bits) { return params(bits, coin(cfg.zero_offset_fraction)); }

  /// Output grid over [lo, hi] shrunk or stretched a little on each side.
  QuantParams output(double lo, double hi, int bits, double shrink = 1.0) {
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo) * shrink;
    const double a = mid - half * uniform(0.7, 1.2), b = mid + half * uniform(0.7, 1.2);
    return make_master_params(a, b, bits);
  }
};

double lo_of(const QuantParams& p) { return p.offset; }
double hi_of(const QuantParams& p) { return p.range_max(); }

void check_binary(VerifyOp op, const IntOpConstants& c, std::int64_t q1, std::int64_t q2, bool exhaustive,
                  Recorder& rec) {
  const bool is_add = op == VerifyOp::Add;
  const QValue got = is_add ? int_add(q1, q2, c, c.out) : int_mul(q1, q2, c, c.out);
  const mpq_class want = clip_exact(is_add ? exact_add(q1, q2, c) : exact_mul(q1, q2, c), c.out.bits);
  const auto bound = op_error_bound(c, scalar_magnitudes(c, q1, q2)).total();
  if (c.degenerate) rec.degenerate();
  rec.record(from_int(got) - want, bound, exhaustive,
             [&] { return describe(c) + " q1=" + std::to_string(q1) + " q2=" + std::to_string(q2); });
}

IntOpConstants binary_constants(VerifyOp op, Sampler& s, int b1, int b2, int by, int frac_bits) {
  const QuantParams p1 = s.params(b1), p2 = s.params(b2);
  if (op == VerifyOp::Add) {
    const QuantParams py = s.output(lo_of(p1) + lo_of(p2), hi_of(p1) + hi_of(p2), by);
    return add_constants(p1, p2, py, frac_bits);
  }
  const double c[4] = {lo_of(p1) * lo_of(p2), lo_of(p1) * hi_of(p2), hi_of(p1) * lo_of(p2), hi_of(p1) * hi_of(p2)};
  const QuantParams py = s.output(*std::min_element(c, c + 4), *std::max_element(c, c + 4), by);
  return mul_constants(p1, p2, py, frac_bits);
}

void verify_binary(VerifyOp op, Sampler& s, std::uint64_t samples, Recorder& rec) {
  const auto& cfg = s.cfg;
  if (cfg.exhaustive) {
    const int top = std::min(cfg.exhaustive_max_bits, cfg.max_bits);
    const int fracs[3] = {0, 8, 16};
    for (int b1 = cfg.min_bits; b1 <= top; ++b1) {
      for (int b2 = cfg.min_bits; b2 <= top; ++b2) {
        for (int f : fracs) {
          const auto c = binary_constants(op, s, b1, b2, std::max(b1, b2), std::min(f, cfg.max_frac_bits));
          for (std::int64_t q1 = 0; q1 < (std::int64_t{1} << b1); ++q1) {
            for (std::int64_t q2 = 0; q2 < (std::int64_t{1} << b2); ++q2) check_binary(op, c, q1, q2, true, rec);
          }
        }
      }
    }
  }
  for (std::uint64_t i = 0; i < samples; ++i) {
    const int b1 = s.uniform_int(cfg.min_bits, cfg.max_bits), b2 = s.uniform_int(cfg.min_bits, cfg.max_bits);
    const int by = s.uniform_int(cfg.min_bits, cfg.max_bits);
    const auto c = binary_constants(op, s, b1, b2, by, s.uniform_int(std::min(8, cfg.max_frac_bits), cfg.max_frac_bits));
    const std::int64_t q1 = s.uniform_int(0, static_cast<int>(c.lhs.max_code()));
    const std::int64_t q2 = s.uniform_int(0, static_cast<int>(c.rhs.max_code()));
    check_binary(op, c, q1, q2, false, rec);
  }
}

IntOpConstants dot_instance(Sampler& s, int bx, int bw, int by, std::size_t n, int frac_bits) {
  const QuantParams px = s.params(bx), pw = s.params(bw);
  const double c[4] = {lo_of(px) * lo_of(pw), lo_of(px) * hi_of(pw), hi_of(px) * lo_of(pw), hi_of(px) * hi_of(pw)};
  const double N = static_cast<double>(n);
  const QuantParams py = s.output(N * *std::min_element(c, c + 4), N * *std::max_element(c, c + 4), by,
                                  s.uniform(1.0 / std::sqrt(N), 1.0));
  return dot_constants(px, pw, py, n, frac_bits);
}

void check_dot(const IntOpConstants& c, std::span<const QValue> x, std::span<const QValue> w, const AccPolicy& acc,
               bool exhaustive, Recorder& rec) {
  const auto r = int_dot(x, w, c, c.out, acc);
  auto what = [&] {
    return describe(c) + " acc=" + std::to_string(acc.working_bits) + " x=[" + join(x) + "] w=[" + join(w) + "]";
  };
  if (c.lhs_offset_zero) {
    const auto p = int_dot_pact(x, w, c, c.out, acc);
    if (p.value != r.value || p.raw != r.raw) rec.mismatch("pact form differs: " + what());
  }
  const mpq_class want = clip_exact(exact_dot(x, w, c), c.out.bits);
  const auto bound = op_error_bound(c, dot_magnitudes(x, w), r.rescale_shift).total();
  if (c.degenerate) rec.degenerate();
  rec.record(from_int(r.value) - want, bound, exhaustive, what);
}

void verify_dot(Sampler& s, std::uint64_t samples, Recorder& rec) {
  const auto& cfg = s.cfg;
  if (cfg.exhaustive) {
    const int fracs[2] = {0, 12};
    for (int b = cfg.min_bits; b <= std::min(3, cfg.max_bits); ++b) {
      for (std::size_t n = 1; n <= 2; ++n) {
        for (int f : fracs) {
          const auto c = dot_instance(s, b, b, b + 2, n, std::min(f, cfg.max_frac_bits));
          const std::uint64_t codes = std::uint64_t{1} << (b * 2 * n);
          std::vector<QValue> x(n), w(n);
          for (std::uint64_t code = 0; code < codes; ++code) {
            std::uint64_t rest = code;
            for (std::size_t i = 0; i < n; ++i) {
              x[i] = static_cast<QValue>(rest & c.lhs.max_code());
              rest >>= b;
              w[i] = static_cast<QValue>(rest & c.rhs.max_code());
              rest >>= b;
            }
            check_dot(c, x, w, AccPolicy{}, true, rec);
          }
        }
      }
    }
  }
  const int widths[4] = {16, 24, 32, 48};
  std::vector<QValue> x, w;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const int bx = s.uniform_int(cfg.min_bits, cfg.max_bits), bw = s.uniform_int(cfg.min_bits, cfg.max_bits);
    const int by = s.uniform_int(cfg.min_bits, cfg.max_bits);
    const auto n = static_cast<std::size_t>(s.uniform_int(1, static_cast<int>(cfg.max_dot_length)));
    const auto c = dot_instance(s, bx, bw, by, n, s.uniform_int(std::min(8, cfg.max_frac_bits), cfg.max_frac_bits));
    x.resize(n);
    w.resize(n);
    for (auto& v : x) v = static_cast<QValue>(s.uniform_int(0, static_cast<int>(c.lhs.max_code())));
    for (auto& v : w) v = static_cast<QValue>(s.uniform_int(0, static_cast<int>(c.rhs.max_code())));
    check_dot(c, x, w, AccPolicy{widths[s.uniform_int(0, 3)], true}, false, rec);
  }
}

void check_shift(std::int64_t q, int n, int b, bool exhaustive, VerifyReport& r, Recorder& rec) {
  const mpq_class eps = shift_error(q, n, b);
  const int s = n - b;
  auto what = [&] { return "shift n=" + std::to_string(n) + " b=" + std::to_string(b) + " q=" + std::to_string(q); };
  const QuantParams master{1.0, 0.0, n, n};
  const std::int64_t want = exact_requantize(q, master, derive_params(master, b));
  if (shift_down_scalar(static_cast<QValue>(q), n, b) != want) rec.mismatch("shift differs from exact requantization: " + what());
  if (exact::abs(eps) == mpq_class(1, 2)) {
    const std::int64_t half = s > 0 ? std::int64_t{1} << (s - 1) : -1;
    if (q % (std::int64_t{1} << s) != half) ++r.off_half_maxima;
  }
  rec.record(eps, mpq_class(1, 2), exhaustive, what);
}

void verify_shift(Sampler& s, std::uint64_t samples, VerifyReport& r, Recorder& rec) {
  const auto& cfg = s.cfg;
  if (cfg.exhaustive) {
    for (int n = std::max(cfg.min_bits, kMinBits); n <= std::min(12, cfg.max_bits); ++n) {
      for (int b = cfg.min_bits; b <= n; ++b) {
        for (std::int64_t q = 0; q < (std::int64_t{1} << n); ++q) check_shift(q, n, b, true, r, rec);
      }
    }
  }
  for (std::uint64_t i = 0; i < samples; ++i) {
    const int n = s.uniform_int(std::max(cfg.min_bits, kMinBits), cfg.max_bits);
    const int b = s.uniform_int(cfg.min_bits, n);
    check_shift(s.uniform_int(0, (1 << n) - 1), n, b, false, r, rec);
  }
}

}  // namespace

VerifyReport empirical_verify(VerifyOp op, const SamplerConfig& config, std::uint64_t samples, std::uint64_t seed) {
  require(config.min_bits >= kMinBits && config.max_bits <= kMaxBits && config.min_bits <= config.max_bits,
          ErrorCode::InvalidArgument, "sampler bit range must lie in [2, 16]");
  require(config.max_frac_bits >= 0 && config.max_frac_bits <= kMaxFracBits, ErrorCode::InvalidArgument,
          "sampler fractional bits must lie in [0, 40]");
  require(config.max_dot_length >= 1 && config.max_dot_length <= 4096, ErrorCode::InvalidArgument,
          "sampler dot length must lie in [1, 4096]");
  VerifyReport r;
  r.op = op;
  r.seed = seed;
  Recorder rec(r);
  Sampler s{std::mt19937_64(seed), config};
  switch (op) {
    case VerifyOp::Add:
    case VerifyOp::Mul: verify_binary(op, s, samples, rec); break;
    case VerifyOp::Dot: verify_dot(s, samples, rec); break;
    case VerifyOp::Shift: verify_shift(s, samples, r, rec); break;
  }
  rec.finish();
  return r;
}

OffsetTermStats dot_offset_term_stats(std::uint64_t samples, std::uint64_t seed, std::size_t length, int bits) {
  require(samples >= 2 && length >= 1, ErrorCode::InvalidArgument, "offset stats need >= 2 samples and N >= 1");
  require(bits >= kMinBits && bits <= kMaxBits, ErrorCode::InvalidArgument, "offset stats bits outside [2, 16]");
  SamplerConfig cfg;
  Sampler s{std::mt19937_64(seed), cfg};
  OffsetTermStats st;
  st.samples = samples;
  double sum = 0.0, sum_sq = 0.0, abs_total = 0.0;
  std::vector<QValue> x(length), w(length);
  for (std::uint64_t i = 0; i < samples; ++i) {
    const QuantParams px = s.params(bits);
    QuantParams pw = s.params(bits, true);
    pw.offset = -pw.scale * static_cast<double>(pw.max_code()) / 2.0;
    const double xmax = std::max(std::fabs(lo_of(px)), std::fabs(hi_of(px)));
    const double half = xmax * pw.range_max() * std::sqrt(static_cast<double>(length)) * s.uniform(0.5, 2.0);
    const QuantParams py = make_master_params(-half, half, bits);
    const auto c = dot_constants(px, pw, py, length, s.uniform_int(8, 20));
    for (auto& v : x) v = static_cast<QValue>(s.uniform_int(0, static_cast<int>(px.max_code())));
    for (auto& v : w) v = static_cast<QValue>(s.uniform_int(0, static_cast<int>(pw.max_code())));
    const auto e = op_error_bound(c, dot_magnitudes(x, w), 0);
    const double t = mpq_class(e.delta[1] * e.magnitude[1] + e.delta[2] * e.magnitude[2]).get_d();
    sum += t;
    sum_sq += t * t;
    const auto r = int_dot(x, w, c, c.out);
    abs_total += exact::abs(from_int(r.value) - clip_exact(exact_dot(x, w, c), c.out.bits)).get_d();
  }
  const double n = static_cast<double>(samples);
  st.mean = sum / n;
  st.stddev = std::sqrt(std::max(0.0, (sum_sq - n * st.mean * st.mean) / (n - 1.0)));
  st.z_score = st.stddev > 0.0 ? st.mean / (st.stddev / std::sqrt(n)) : 0.0;
  st.mean_abs_total_error = abs_total / n;
  return st;
}

bool SuiteReport::passed() const {
  for (const auto& r : ops) {
    if (!r.passed()) return false;
    if (r.op == VerifyOp::Shift && (r.max_abs_error != 0.5 || r.off_half_maxima != 0)) return false;
  }
  return true;
}

SuiteReport run_verify_suite(std::string_view suite, std::uint64_t seed, std::uint64_t samples) {
  require(suite == "appendix-c" || suite == "bounds", ErrorCode::InvalidArgument,
          "unknown verify suite '" + std::string(suite) + "'");
  SuiteReport rep;
  rep.suite = std::string(suite);
  rep.seed = seed;
  const VerifyOp ops[4] = {VerifyOp::Add, VerifyOp::Mul, VerifyOp::Dot, VerifyOp::Shift};
  for (std::size_t i = 0; i < 4; ++i) {
    rep.ops.push_back(empirical_verify(ops[i], SamplerConfig{}, samples, splitmix(seed + i)));
  }
  rep.offset_stats = dot_offset_term_stats(std::max<std::uint64_t>(samples / 10, 2), splitmix(seed + 4));
  return rep;
}

}  // namespace nestq
