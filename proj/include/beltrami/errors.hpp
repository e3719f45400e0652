#ifndef BELTRAMI_ERRORS_HPP
#define BELTRAMI_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace beltrami {

// Error categories; the numeric codes are shared with the C API and the
// CLI exit conventions (validation = 2, solver = 3, inconclusive = 4).
enum class ErrorCode {
    Validation = 2,
    Solver = 3,
    Inconclusive = 4,
    Domain = 5,
    Degeneracy = 6,
    Argument = 7,
    Topology = 8,
    Geometry = 9,
    Unsupported = 10,
    Io = 11,
    Internal = 12,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(ErrorCode::Validation, w) {}
};
struct SolverError : Error {
    explicit SolverError(const std::string& w) : Error(ErrorCode::Solver, w) {}
};
struct DomainError : Error {
    explicit DomainError(const std::string& w) : Error(ErrorCode::Domain, w) {}
};
struct DegeneracyError : Error {
    explicit DegeneracyError(const std::string& w) : Error(ErrorCode::Degeneracy, w) {}
};
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& w) : Error(ErrorCode::Argument, w) {}
};
struct TopologyError : Error {
    explicit TopologyError(const std::string& w) : Error(ErrorCode::Topology, w) {}
};
struct GeometryError : Error {
    explicit GeometryError(const std::string& w) : Error(ErrorCode::Geometry, w) {}
};
struct UnsupportedError : Error {
    explicit UnsupportedError(const std::string& w) : Error(ErrorCode::Unsupported, w) {}
};
struct QuadratureError : Error {
    explicit QuadratureError(const std::string& w) : Error(ErrorCode::Internal, w) {}
};

} // namespace beltrami

#endif
