#ifndef KS_ERRORS_HPP
#define KS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ks {

enum class errc {
    non_positive_radius,
    out_of_tabulated_range,
    divergent_tail,
    quadrature_non_convergence,
    overflow,
    grid_too_coarse,
    inconclusive,
    not_found,
    resolution_too_low,
    unsupported_dimension,
    non_integrable_kernel,
    grid_too_large,
    grid_mismatch,
    non_convergence,
    trivial_collapse,
    path_collapse,
    rho_not_multiple_of_h,
    config_parse_error,
    cache_fingerprint_mismatch,
    io_error,
    invalid_argument,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::non_positive_radius:        return "NonPositiveRadius";
        case errc::out_of_tabulated_range:     return "OutOfTabulatedRange";
        case errc::divergent_tail:             return "DivergentTail";
        case errc::quadrature_non_convergence: return "QuadratureNonConvergence";
        case errc::overflow:                   return "Overflow";
        case errc::grid_too_coarse:            return "GridTooCoarse";
        case errc::inconclusive:               return "Inconclusive";
        case errc::not_found:                  return "NotFound";
        case errc::resolution_too_low:         return "ResolutionTooLow";
        case errc::unsupported_dimension:      return "UnsupportedDimension";
        case errc::non_integrable_kernel:      return "NonIntegrableKernel";
        case errc::grid_too_large:             return "GridTooLarge";
        case errc::grid_mismatch:              return "GridMismatch";
        case errc::non_convergence:            return "NonConvergence";
        case errc::trivial_collapse:           return "TrivialCollapse";
        case errc::path_collapse:              return "PathCollapse";
        case errc::rho_not_multiple_of_h:      return "RhoNotMultipleOfH";
        case errc::config_parse_error:         return "ConfigParseError";
        case errc::cache_fingerprint_mismatch: return "CacheFingerprintMismatch";
        case errc::io_error:                   return "IoError";
        case errc::invalid_argument:           return "InvalidArgument";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace ks

#endif
