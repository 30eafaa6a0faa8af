#pragma once

#include <stdexcept>
#include <string>

namespace brlab {

enum class errc {
  bad_probabilities,
  non_refining,
  level_out_of_range,
  bad_exponent,
  shape_mismatch,
  zero_vector,
  zero_input,
  negative_entry,
  even_index_nonzero,
  solver_diverged,
  dimension_cap,
  bad_rate,
  intensity_not_predictable,
  not_predictable,
  mass_exceeds_one,
  atom_in_time,
  lipschitz_violated,
  unannotated_increment,
  not_conditionally_centered,
  config_invalid,
  hash_mismatch,
};

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

} // namespace brlab
