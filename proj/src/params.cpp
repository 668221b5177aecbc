#include "ladder/params.hpp"

#include "ladder/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace ladder {

std::string_view to_string(SymmetryClass c)
{
    return c == SymmetryClass::symmetric ? "sym" : "antisym";
}

SymmetryClass parse_symmetry_class(std::string_view text)
{
    if (text == "sym" || text == "symmetric" || text == "s")
        return SymmetryClass::symmetric;
    if (text == "antisym" || text == "antisymmetric" || text == "a")
        return SymmetryClass::antisymmetric;
    throw ConfigError("class", "expected 'sym' or 'antisym', got '" + std::string(text) + "'");
}

LengthSpec::LengthSpec(std::int64_t num, std::int64_t den, bool times_pi)
    : num_(num), den_(den), times_pi_(times_pi)
{
    if (den_ == 0)
        throw ConfigError("L", "zero denominator");
    if (den_ < 0) {
        num_ = -num_;
        den_ = -den_;
    }
    const auto g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
        num_ /= g;
        den_ /= g;
    }
}

namespace {

std::string trim(std::string_view s)
{
    std::string out;
    for (char c : s)
        if (c != ' ' && c != '\t')
            out.push_back(c);
    return out;
}

// Parses a non-negative decimal ("12", "0.125", "3.") into an exact fraction.
bool parse_decimal(std::string_view s, std::int64_t& num, std::int64_t& den)
{
    if (s.empty())
        return false;
    num = 0;
    den = 1;
    bool seen_dot = false;
    bool seen_digit = false;
    for (char c : s) {
        if (c == '.') {
            if (seen_dot)
                return false;
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9')
            return false;
        seen_digit = true;
        if (num > (INT64_MAX - 9) / 10 || (seen_dot && den > INT64_MAX / 10))
            return false;
        num = num * 10 + (c - '0');
        if (seen_dot)
            den *= 10;
    }
    return seen_digit;
}

} // namespace

LengthSpec LengthSpec::parse(std::string_view text)
{
    std::string s = trim(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s.empty())
        throw ConfigError("L", "empty value");

    bool has_pi = false;
    if (auto pos = s.find("pi"); pos != std::string::npos) {
        has_pi = true;
        s.erase(pos, 2);
        if (pos > 0 && s[pos - 1] == '*') {
            s.erase(pos - 1, 1);
            --pos;
        }
        if (pos < s.size() && s[pos] == '*')
            s.erase(pos, 1);
        if (s.find("pi") != std::string::npos)
            throw ConfigError("L", "pi may appear at most once");
    }

    std::string num_part = s;
    std::string den_part;
    if (auto slash = s.find('/'); slash != std::string::npos) {
        num_part = s.substr(0, slash);
        den_part = s.substr(slash + 1);
    }
    if (num_part.empty() && has_pi)
        num_part = "1";

    std::int64_t n1 = 0, d1 = 1, n2 = 1, d2 = 1;
    if (!parse_decimal(num_part, n1, d1))
        throw ConfigError("L", "cannot parse '" + std::string(text) + "'");
    if (!den_part.empty() && !parse_decimal(den_part, n2, d2))
        throw ConfigError("L", "cannot parse denominator of '" + std::string(text) + "'");
    if (n2 == 0)
        throw ConfigError("L", "zero denominator");
    LengthSpec out(n1 * d2, d1 * n2, has_pi);
    if (out.value() <= 0.0)
        throw ConfigError("L", "must be positive");
    return out;
}

LengthSpec LengthSpec::from_double(double value)
{
    std::ostringstream os;
    os.precision(15);
    os << value;
    const std::string text = os.str();
    std::int64_t n = 0, d = 1;
    if (text.find('e') == std::string::npos && parse_decimal(text, n, d)) {
        LengthSpec out(n, d);
        if (out.value() == value)
            return out;
    }
    LengthSpec out;
    out.inexact_ = true;
    out.inexact_value_ = value;
    return out;
}

double LengthSpec::value() const noexcept
{
    if (inexact_)
        return inexact_value_;
    const double base = static_cast<double>(num_) / static_cast<double>(den_);
    return times_pi_ ? base * std::numbers::pi : base;
}

std::string LengthSpec::to_string() const
{
    if (inexact_) {
        std::ostringstream os;
        os.precision(17);
        os << inexact_value_;
        return os.str();
    }
    std::string out = std::to_string(num_);
    if (times_pi_)
        out += "pi";
    if (den_ != 1)
        out += "/" + std::to_string(den_);
    return out;
}

void LadderParams::validate() const
{
    if (!(height() > 0.0) || !std::isfinite(height()))
        throw ConfigError("L", "must be positive and finite");
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw ConfigError("mu", "must be positive");
}

void LadderParams::validate_with_eps() const
{
    validate();
    if (!eps)
        throw ConfigError("eps", "required for the two-dimensional solvers");
    const double limit = std::min(1.0, height() / 2.0);
    if (!(*eps > 0.0) || !(*eps < limit))
        throw ConfigError("eps", "must satisfy 0 < eps < min(1, L/2) = " + std::to_string(limit));
}

double LadderParams::thickness() const
{
    if (!eps)
        throw ConfigError("eps", "not set");
    return *eps;
}

} // namespace ladder
