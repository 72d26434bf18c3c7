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

#pragma once

// Exact rational helpers. Every finite double is a dyadic rational, so
// converting through mpq_class loses nothing.

#include <gmpxx.h>

#include <cstdint>

namespace nestq::exact {

inline mpq_class from_double(double v) { return mpq_class(v); }

inline mpq_class pow2(int e) {
  mpq_class r(1);
  if (e >= 0) {
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(e));
  } else {
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-e));
  }
  r.canonicalize();
  return r;
}

inline mpz_class floor(const mpq_class& q) {
  mpz_class r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

/// Nearest integer, ties away from zero.
inline mpz_class round_half_away(const mpq_class& q) {
  const mpq_class half(1, 2);
  if (sgn(q) >= 0) return floor(q + half);
  return -floor(-q + half);
}

inline mpq_class clamp(const mpq_class& q, const mpq_class& lo, const mpq_class& hi) {
  if (q < lo) return lo;
  if (q > hi) return hi;
  return q;
}

inline mpq_class abs(const mpq_class& q) { return sgn(q) < 0 ? mpq_class(-q) : q; }

inline bool fits_int64(const mpz_class& z) { return mpz_fits_slong_p(z.get_mpz_t()) != 0; }

inline std::int64_t to_int64(const mpz_class& z) { return static_cast<std::int64_t>(z.get_si()); }

inline mpq_class from_int(std::int64_t v) { return mpq_class(mpz_class(static_cast<long>(v))); }

}  // namespace nestq::exact
