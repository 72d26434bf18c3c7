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

#include "nestq/int_arith.hpp"

#include <algorithm>
#include <bit>

#include "nestq/exact.hpp"

namespace nestq {

namespace {

void check_frac_bits(int frac_bits) {
  require(frac_bits >= 0 && frac_bits <= kMaxFracBits, ErrorCode::InvalidArgument,
          "fractional bits must lie in [0, 40]");
}

// Encodes ratio * 2^F with ties away from zero; flags zero-rounded nonzero ratios.
std::int64_t encode(const mpq_class& ratio, int frac_bits, bool& degenerate) {
  const mpz_class k = exact::round_half_away(ratio * exact::pow2(frac_bits));
  require(exact::fits_int64(k) && abs(k) < (mpz_class(1) << 62), ErrorCode::Overflow,
          "integer operator constant does not fit in 62 bits; scale ratio too large");
  if (k == 0 && sgn(ratio) != 0) degenerate = true;
  return exact::to_int64(k);
}

QValue finish(Wide raw, int frac_bits, const QuantParams& py) { return clip_to(round_shift(raw, frac_bits), py.bits); }

void check_role(const IntOpConstants& c, OpRole role) {
  require(c.role == role, ErrorCode::InvalidArgument,
          "constants built for " + to_string(c.role) + " used for " + to_string(role));
}

}  // namespace

std::string to_string(OpRole role) {
  switch (role) {
    case OpRole::Add: return "add";
    case OpRole::Mul: return "mul";
    case OpRole::Dot: return "dot";
  }
  return "unknown";
}

IntOpConstants add_constants(const QuantParams& p1, const QuantParams& p2, const QuantParams& py, int frac_bits) {
  validate(p1);
  validate(p2);
  validate(py);
  check_frac_bits(frac_bits);
  using exact::from_double;
  const mpq_class dy = from_double(py.scale);
  IntOpConstants c;
  c.role = OpRole::Add;
  c.frac_bits = frac_bits;
  c.lhs = p1;
  c.rhs = p2;
  c.out = py;
  c.lhs_offset_zero = p1.offset == 0.0;
  c.k[0] = encode(from_double(p1.scale) / dy, frac_bits, c.degenerate);
  c.k[1] = encode(from_double(p2.scale) / dy, frac_bits, c.degenerate);
  c.k[2] = encode((from_double(p1.offset) + from_double(p2.offset) - from_double(py.offset)) / dy, frac_bits,
                  c.degenerate);
  return c;
}

IntOpConstants mul_constants(const QuantParams& p1, const QuantParams& p2, const QuantParams& py, int frac_bits) {
  validate(p1);
  validate(p2);
  validate(py);
  check_frac_bits(frac_bits);
  using exact::from_double;
  const mpq_class d1 = from_double(p1.scale), d2 = from_double(p2.scale), dy = from_double(py.scale);
  const mpq_class m1 = from_double(p1.offset), m2 = from_double(p2.offset), my = from_double(py.offset);
  IntOpConstants c;
  c.role = OpRole::Mul;
  c.frac_bits = frac_bits;
  c.lhs = p1;
  c.rhs = p2;
  c.out = py;
  c.lhs_offset_zero = p1.offset == 0.0;
  c.k[0] = encode(d1 * d2 / dy, frac_bits, c.degenerate);
  c.k[1] = encode(d1 * m2 / dy, frac_bits, c.degenerate);
  c.k[2] = encode(d2 * m1 / dy, frac_bits, c.degenerate);
  c.k[3] = encode((m1 * m2 - my) / dy, frac_bits, c.degenerate);
  return c;
}

IntOpConstants dot_constants(const QuantParams& px, const QuantParams& pw, const QuantParams& py, std::size_t n,
                             int frac_bits) {
  validate(px);
  validate(pw);
  validate(py);
  check_frac_bits(frac_bits);
  using exact::from_double;
  const mpq_class dx = from_double(px.scale), dw = from_double(pw.scale), dy = from_double(py.scale);
  const mpq_class mx = from_double(px.offset), mw = from_double(pw.offset), my = from_double(py.offset);
  IntOpConstants c;
  c.role = OpRole::Dot;
  c.frac_bits = frac_bits;
  c.length = n;
  c.lhs = px;
  c.rhs = pw;
  c.out = py;
  c.lhs_offset_zero = px.offset == 0.0;
  c.k[0] = encode(dx * dw / dy, frac_bits, c.degenerate);
  c.k[1] = encode(dx * mw / dy, frac_bits, c.degenerate);
  c.k[2] = encode(dw * mx / dy, frac_bits, c.degenerate);
  c.k[3] = encode((mpq_class(mpz_class(static_cast<unsigned long>(n))) * mx * mw - my) / dy, frac_bits, c.degenerate);
  return c;
}

IntOpConstants requant_constants(const QuantParams& in, const QuantParams& out, int frac_bits) {
  QuantParams zero = in;
  zero.offset = 0.0;
  auto c = add_constants(in, zero, out, frac_bits);
  c.k[1] = 0;
  c.unary = true;
  return c;
}

Wide round_shift(Wide v, int shift) {
  if (shift <= 0) return v;
  const Wide half = Wide{1} << (shift - 1);
  if (v >= 0) return (v + half) >> shift;
  return -((-v + half) >> shift);
}

QValue clip_to(Wide v, int bits) {
  const Wide top = (Wide{1} << bits) - 1;
  return static_cast<QValue>(std::clamp<Wide>(v, 0, top));
}

QValue int_add(std::int64_t q1, std::int64_t q2, const IntOpConstants& c, const QuantParams& py) {
  check_role(c, OpRole::Add);
  const Wide raw = Wide{c.k[0]} * q1 + Wide{c.k[1]} * q2 + c.k[2];
  return finish(raw, c.frac_bits, py);
}

QValue int_add_fixed(Wide lhs, int lhs_frac_bits, std::int64_t q2, const IntOpConstants& c, const QuantParams& py) {
  check_role(c, OpRole::Add);
  require(lhs_frac_bits >= 0 && lhs_frac_bits <= kMaxFracBits, ErrorCode::InvalidArgument,
          "int_add_fixed: bad lhs fractional bits");
  const Wide rest = (Wide{c.k[1]} * q2 + c.k[2]) * (Wide{1} << lhs_frac_bits);
  const Wide raw = Wide{c.k[0]} * lhs + rest;
  return finish(raw, c.frac_bits + lhs_frac_bits, py);
}

QValue int_mul(std::int64_t q1, std::int64_t q2, const IntOpConstants& c, const QuantParams& py) {
  check_role(c, OpRole::Mul);
  const Wide raw = Wide{c.k[0]} * q1 * q2 + Wide{c.k[1]} * q1 + Wide{c.k[2]} * q2 + c.k[3];
  return finish(raw, c.frac_bits, py);
}

int required_accumulator_bits(int lhs_bits, int rhs_bits, std::size_t n) {
  int log2n = 0;
  if (n > 1) log2n = std::bit_width(n - 1);  // ceil(log2 n)
  return lhs_bits + rhs_bits + log2n;
}

namespace {

struct Sums {
  std::uint64_t xw = 0;
  std::uint64_t x = 0;
  std::uint64_t w = 0;
};

void check_operands(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c) {
  require(xq.size() == wq.size(), ErrorCode::Shape, "int_dot: operand lengths differ");
  require(c.length == xq.size(), ErrorCode::Shape,
          "int_dot: constants built for N=" + std::to_string(c.length) + " but got N=" + std::to_string(xq.size()));
  const auto xtop = c.lhs.max_code();
  const auto wtop = c.rhs.max_code();
  for (std::size_t i = 0; i < xq.size(); ++i) {
    require(xq[i] <= xtop && wq[i] <= wtop, ErrorCode::InvalidArgument, "int_dot: operand code outside its grid");
  }
}

DotResult finish_dot(const Sums& s, bool with_w_sum, const IntOpConstants& c, const QuantParams& py,
                     const AccPolicy& policy, std::size_t n) {
  DotResult r;
  r.frac_bits = c.frac_bits;
  const int needed = required_accumulator_bits(c.lhs.bits, c.rhs.bits, n);
  Wide xw = static_cast<Wide>(s.xw);
  if (needed > policy.working_bits) {
    require(policy.rescale, ErrorCode::Overflow,
            "int_dot: accumulator needs " + std::to_string(needed) + " bits, working width is " +
                std::to_string(policy.working_bits) + " and rescale is disabled");
    r.rescale_shift = needed - policy.working_bits;
    xw = round_shift(xw, r.rescale_shift);
    r.epilogue.shifts += 1;
  }
  Wide raw = Wide{c.k[0]} * xw;
  if (r.rescale_shift > 0) raw *= (Wide{1} << r.rescale_shift);
  raw += Wide{c.k[1]} * static_cast<Wide>(s.x);
  r.epilogue.mults += 2;
  r.epilogue.adds += 2;
  if (with_w_sum) {
    raw += Wide{c.k[2]} * static_cast<Wide>(s.w);
    r.epilogue.mults += 1;
    r.epilogue.adds += 1;
  }
  raw += c.k[3];
  r.raw = raw;
  r.value = finish(raw, c.frac_bits, py);
  r.epilogue.shifts += 1;
  return r;
}

}  // namespace

DotResult int_dot(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c,
                  const QuantParams& py, const AccPolicy& policy) {
  check_role(c, OpRole::Dot);
  require(!xq.empty(), ErrorCode::InvalidArgument, "int_dot: empty operands");
  check_operands(xq, wq, c);
  Sums s;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    s.xw += static_cast<std::uint64_t>(xq[i]) * wq[i];
    s.x += xq[i];
    s.w += wq[i];
  }
  auto r = finish_dot(s, true, c, py, policy, xq.size());
  const auto n = static_cast<std::uint64_t>(xq.size());
  r.inner.mults = n;
  r.inner.adds = 3 * n;
  return r;
}

DotResult int_dot_pact(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c,
                       const QuantParams& py, const AccPolicy& policy) {
  check_role(c, OpRole::Dot);
  require(c.lhs_offset_zero, ErrorCode::InvalidArgument,
          "int_dot_pact: activation offset must be zero (PACT-clamped input)");
  check_operands(xq, wq, c);
  Sums s;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    s.xw += static_cast<std::uint64_t>(xq[i]) * wq[i];
    s.x += xq[i];
  }
  auto r = finish_dot(s, false, c, py, policy, xq.size());
  const auto n = static_cast<std::uint64_t>(xq.size());
  r.inner.mults = n;
  r.inner.adds = 2 * n;
  return r;
}

StandardMacResult standard_mac(std::span<const QValue> xq, std::span<const QValue> wq, std::int64_t zx,
                               std::int64_t zw) {
  require(xq.size() == wq.size(), ErrorCode::Shape, "standard_mac: operand lengths differ");
  StandardMacResult r;
  for (std::size_t i = 0; i < xq.size(); ++i) {
    r.acc += (static_cast<std::int64_t>(xq[i]) - zx) * (static_cast<std::int64_t>(wq[i]) - zw);
  }
  const auto n = static_cast<std::uint64_t>(xq.size());
  r.inner.mults = n;
  r.inner.adds = 3 * n;
  return r;
}

}  // namespace nestq
