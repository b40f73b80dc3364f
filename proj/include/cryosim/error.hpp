#pragma once
#include <stdexcept>
#include <string>

namespace cryosim {

// Error classes map onto CLI exit codes: config=2, data=3, internal=4.
enum class errc { config, data, internal };

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw error(errc::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw error(errc::data, msg); }
[[noreturn]] inline void fail_internal(const std::string& msg) { throw error(errc::internal, msg); }

} // namespace cryosim
