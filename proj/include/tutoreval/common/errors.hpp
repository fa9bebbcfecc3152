#pragma once

#include <stdexcept>
#include <string>

namespace tutoreval {

// Every error raised by the library carries a machine-readable category so the
// CLI can report it without string matching.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

#define TUTOREVAL_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                        \
    public:                                                            \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

TUTOREVAL_DEFINE_ERROR(RunError);
TUTOREVAL_DEFINE_ERROR(ParseError);
TUTOREVAL_DEFINE_ERROR(StructureError);
TUTOREVAL_DEFINE_ERROR(ConfigError);
TUTOREVAL_DEFINE_ERROR(ProvenanceError);
TUTOREVAL_DEFINE_ERROR(ScoreError);
TUTOREVAL_DEFINE_ERROR(NotApplicable);
TUTOREVAL_DEFINE_ERROR(DegenerateError);
TUTOREVAL_DEFINE_ERROR(DesignError);
TUTOREVAL_DEFINE_ERROR(LedgerError);
TUTOREVAL_DEFINE_ERROR(CycleError);
TUTOREVAL_DEFINE_ERROR(BenchmarkError);
TUTOREVAL_DEFINE_ERROR(StoreError);

#undef TUTOREVAL_DEFINE_ERROR

}  // namespace tutoreval
