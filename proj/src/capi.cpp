#include "ladder_c.h"

#include "ladder/errors.hpp"
#include "ladder/graph_core.hpp"
#include "ladder/study.hpp"

#include <exception>
#include <string>

struct ladder_run {
    ladder::study::Output output;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_field;

template <class F>
int guarded(F&& body)
{
    last_error.clear();
    last_field.clear();
    try {
        body();
        return LADDER_OK;
    } catch (const ladder::ConfigError& e) {
        last_error = e.what();
        last_field = e.field();
        return LADDER_ERR_CONFIG;
    } catch (const ladder::GeometryError& e) {
        last_error = e.what();
        last_field = "eps";
        return LADDER_ERR_CONFIG;
    } catch (const ladder::DomainError& e) {
        last_error = e.what();
        return LADDER_ERR_CONFIG;
    } catch (const ladder::NumericalError& e) {
        last_error = e.what();
        return LADDER_ERR_NUMERICAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LADDER_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return LADDER_ERR_INTERNAL;
    }
}

int bad_argument(const char* what)
{
    last_error = what;
    last_field.clear();
    return LADDER_ERR_ARGUMENT;
}

} // namespace

extern "C" {

const char* ladder_version(void) { return "1.0.0"; }

int ladder_schema_version(void) { return ladder::study::schema_version; }

const char* ladder_last_error(void) { return last_error.c_str(); }

const char* ladder_last_error_field(void) { return last_field.c_str(); }

int ladder_config_resolve(const char* config_json, ladder_run** out)
{
    if (!config_json || !out)
        return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] {
        const auto cfg = ladder::study::config_from_json(config_json);
        cfg.validate();
        auto* run = new ladder_run;
        run->output.json = ladder::study::config_to_json(cfg);
        *out = run;
    });
}

int ladder_run_config(const char* config_json, ladder_run** out)
{
    if (!config_json || !out)
        return bad_argument("null argument");
    *out = nullptr;
    return guarded([&] {
        const auto cfg = ladder::study::config_from_json(config_json);
        auto* run = new ladder_run{ladder::study::run(cfg)};
        *out = run;
    });
}

const char* ladder_run_csv(const ladder_run* run) { return run ? run->output.csv.c_str() : ""; }

const char* ladder_run_report(const ladder_run* run)
{
    return run ? run->output.json.c_str() : "";
}

int ladder_run_passed(const ladder_run* run)
{
    if (!run || !run->output.pass)
        return -1;
    return *run->output.pass ? 1 : 0;
}

size_t ladder_run_attachment_count(const ladder_run* run)
{
    return run ? run->output.attachments.size() : 0;
}

const char* ladder_run_attachment_name(const ladder_run* run, size_t index)
{
    if (!run || index >= run->output.attachments.size())
        return nullptr;
    return run->output.attachments[index].first.c_str();
}

const char* ladder_run_attachment_data(const ladder_run* run, size_t index)
{
    if (!run || index >= run->output.attachments.size())
        return nullptr;
    return run->output.attachments[index].second.c_str();
}

void ladder_run_free(ladder_run* run) { delete run; }

int ladder_graph_g(double omega, const char* L, const char* cls, double* out)
{
    if (!L || !cls || !out)
        return bad_argument("null argument");
    return guarded([&] {
        const auto len = ladder::LengthSpec::parse(L);
        *out = ladder::graph::g_value(omega, len.value(), ladder::parse_symmetry_class(cls))
                   .to_double();
    });
}

int ladder_graph_reflection_root(double omega, const char* L, const char* cls, double* out)
{
    if (!L || !cls || !out)
        return bad_argument("null argument");
    return guarded([&] {
        const auto len = ladder::LengthSpec::parse(L);
        *out = ladder::graph::reflection_root(omega, len.value(), ladder::parse_symmetry_class(cls));
    });
}

int ladder_graph_eigenvalues(const char* L, double mu, const char* cls, double omega_max,
                             double* out, size_t capacity, size_t* count)
{
    if (!L || !cls || !count || (capacity > 0 && !out))
        return bad_argument("null argument");
    return guarded([&] {
        const double len = ladder::LengthSpec::parse(L).value();
        const auto c = ladder::parse_symmetry_class(cls);
        if (!(mu > 0.0))
            throw ladder::ConfigError("mu", "must be positive");
        size_t n = 0;
        for (const auto& g : ladder::graph::gaps(len, c, omega_max))
            for (const auto& ev : ladder::graph::discrete_eigenvalues(len, mu, c, g)) {
                if (n < capacity)
                    out[n] = ev.omega;
                ++n;
            }
        *count = n;
    });
}

} // extern "C"
