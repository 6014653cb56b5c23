#include "transim/c_api.h"

#include "transim/engine.hpp"
#include "transim_interface_digest.h"

#include <memory>
#include <string>

struct transim_session {
    transim::EngineSession engine;
};

namespace {

using transim::ErrorCode;

thread_local std::string g_last_error;

template <class Fn>
int32_t guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return 0;
    } catch (const transim::Error& e) {
        g_last_error = e.what();
        return static_cast<int32_t>(e.code());
    } catch (const std::exception& e) {
        g_last_error = std::string("InvalidArgument: ") + e.what();
        return static_cast<int32_t>(ErrorCode::InvalidArgument);
    }
}

void require(const void* p, const char* what) {
    if (!p) {
        throw transim::Error(ErrorCode::InvalidArgument, std::string(what) + " is null");
    }
}

void check_capacity(int64_t need, int64_t capacity, int64_t* len) {
    require(len, "len");
    *len = need;
    if (capacity < need) {
        throw transim::Error(ErrorCode::DimensionMismatch,
                             "buffer holds " + std::to_string(capacity) + " values, " + std::to_string(need) + " needed");
    }
}

std::vector<std::vector<double>> extract(const transim_session* s, const char* column) {
    require(column, "column");
    return s->engine.result().extract(column);
}

}  // namespace

extern "C" {

int32_t transim_abi_version(void) {
    return 1;
}

const char* transim_interface_digest(void) {
    return TRANSIM_INTERFACE_DIGEST;
}

const char* transim_last_error(void) {
    return g_last_error.c_str();
}

const char* transim_error_name(int32_t code) {
    return transim::to_string(static_cast<ErrorCode>(code)).data();
}

int32_t transim_session_load(const char* path, transim_session** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new transim_session{transim::EngineSession::load_case(path)};
    });
}

int32_t transim_session_free(transim_session* s) {
    delete s;
    return 0;
}

int32_t transim_session_export(const transim_session* s, const char* path) {
    return guarded([&] {
        require(s, "session");
        require(path, "path");
        s->engine.export_case(path);
    });
}

int32_t transim_session_state(const transim_session* s, int32_t* state) {
    return guarded([&] {
        require(s, "session");
        require(state, "state");
        *state = static_cast<int32_t>(s->engine.state());
    });
}

int32_t transim_component_count(const transim_session* s, const char* kind, int64_t* count) {
    return guarded([&] {
        require(s, "session");
        require(kind, "kind");
        require(count, "count");
        *count = static_cast<int64_t>(s->engine.component_count(kind));
    });
}

int32_t transim_get_parameter(const transim_session* s, const char* kind, int32_t index, const char* field,
                              double* value) {
    return guarded([&] {
        require(s, "session");
        require(kind, "kind");
        require(field, "field");
        require(value, "value");
        *value = s->engine.get_parameter(kind, index, field);
    });
}

int32_t transim_set_parameter(transim_session* s, const char* kind, int32_t index, const char* field, double value,
                              int32_t force) {
    return guarded([&] {
        require(s, "session");
        require(kind, "kind");
        require(field, "field");
        s->engine.set_parameter(kind, index, field, value, force != 0);
    });
}

int32_t transim_set_branch_status(transim_session* s, int32_t branch, int32_t in_service, int64_t* island_count,
                                  int32_t* flagged) {
    return guarded([&] {
        require(s, "session");
        const auto report = s->engine.set_branch_status(branch, in_service != 0);
        if (island_count) *island_count = static_cast<int64_t>(report.islands.size());
        if (flagged) *flagged = report.flagged() ? 1 : 0;
    });
}

int32_t transim_run_power_flow(transim_session* s, int32_t* converged, int32_t* iterations) {
    return guarded([&] {
        require(s, "session");
        const auto& pf = s->engine.run_power_flow();
        if (converged) *converged = pf.converged ? 1 : 0;
        if (iterations) *iterations = pf.iterations;
    });
}

int32_t transim_power_flow_voltages(const transim_session* s, double* vm, double* va, int64_t capacity, int64_t* len) {
    return guarded([&] {
        require(s, "session");
        const auto& pf = s->engine.power_flow();
        check_capacity(static_cast<int64_t>(pf.vm.size()), capacity, len);
        require(vm, "vm");
        require(va, "va");
        std::copy(pf.vm.begin(), pf.vm.end(), vm);
        std::copy(pf.va.begin(), pf.va.end(), va);
    });
}

int32_t transim_set_fault(transim_session* s, int32_t branch, double location, double t_fault, double t_clear) {
    return guarded([&] {
        require(s, "session");
        s->engine.set_fault(transim::FaultEvent{branch, location, t_fault, t_clear, true});
    });
}

int32_t transim_clear_fault(transim_session* s) {
    return guarded([&] {
        require(s, "session");
        s->engine.set_fault(std::nullopt);
    });
}

int32_t transim_prepare_simulation(transim_session* s) {
    return guarded([&] {
        require(s, "session");
        (void)s->engine.prepare_simulation();
    });
}

int32_t transim_run_simulation(transim_session* s, int32_t* label) {
    return guarded([&] {
        require(s, "session");
        const auto& r = s->engine.run_simulation();
        if (label) *label = static_cast<int32_t>(r.label);
    });
}

int32_t transim_advance(transim_session* s, int64_t steps, int64_t* taken) {
    return guarded([&] {
        require(s, "session");
        const auto n = s->engine.advance(steps);
        if (taken) *taken = n;
    });
}

int32_t transim_query_scalar(const transim_session* s, const char* item, double* value) {
    return guarded([&] {
        require(s, "session");
        require(item, "item");
        require(value, "value");
        const auto q = s->engine.query(item);
        if (const auto* i = std::get_if<std::int64_t>(&q)) {
            *value = static_cast<double>(*i);
        } else if (const auto* d = std::get_if<double>(&q)) {
            *value = *d;
        } else if (const auto* b = std::get_if<bool>(&q)) {
            *value = *b ? 1.0 : 0.0;
        } else {
            throw transim::Error(ErrorCode::InvalidArgument, std::string("'") + item + "' is not a scalar item");
        }
    });
}

int32_t transim_query_matrix(const transim_session* s, const char* item, int32_t* rows, int32_t* cols, double* re,
                             double* im, int64_t capacity, int64_t* len, int64_t* dimension) {
    return guarded([&] {
        require(s, "session");
        require(item, "item");
        const auto q = s->engine.query(item);
        const auto* m = std::get_if<transim::ComplexMatrix>(&q);
        if (!m) {
            throw transim::Error(ErrorCode::InvalidArgument, std::string("'") + item + "' is not a matrix item");
        }
        if (dimension) *dimension = m->dimension();
        const auto triplets = m->triplets();
        check_capacity(static_cast<int64_t>(triplets.size()), capacity, len);
        require(rows, "rows");
        require(cols, "cols");
        require(re, "re");
        require(im, "im");
        for (std::size_t i = 0; i < triplets.size(); ++i) {
            rows[i] = triplets[i].row;
            cols[i] = triplets[i].col;
            re[i] = triplets[i].value.real();
            im[i] = triplets[i].value.imag();
        }
    });
}

int32_t transim_query_index_array(const transim_session* s, const char* item, int32_t* out, int64_t capacity,
                                  int64_t* len) {
    return guarded([&] {
        require(s, "session");
        require(item, "item");
        const auto q = s->engine.query(item);
        std::vector<int32_t> values;
        if (const auto* p = std::get_if<std::vector<transim::Index>>(&q)) {
            values.assign(p->begin(), p->end());
        } else if (const auto* islands = std::get_if<std::vector<std::vector<int>>>(&q)) {
            // island label per bus position
            const auto& c = s->engine.case_data();
            values.assign(c.buses.size(), -1);
            for (std::size_t k = 0; k < islands->size(); ++k) {
                for (const int id : (*islands)[k]) {
                    values[static_cast<std::size_t>(c.bus_index(id))] = static_cast<int32_t>(k);
                }
            }
        } else {
            throw transim::Error(ErrorCode::InvalidArgument, std::string("'") + item + "' is not an index item");
        }
        check_capacity(static_cast<int64_t>(values.size()), capacity, len);
        require(out, "out");
        std::copy(values.begin(), values.end(), out);
    });
}

int32_t transim_result_shape(const transim_session* s, const char* column, int64_t* rows, int64_t* cols) {
    return guarded([&] {
        require(s, "session");
        const auto data = extract(s, column);
        if (rows) *rows = static_cast<int64_t>(data.size());
        if (cols) *cols = data.empty() ? 0 : static_cast<int64_t>(data.front().size());
    });
}

int32_t transim_result_extract(const transim_session* s, const char* column, double* out, int64_t capacity,
                               int64_t* len) {
    return guarded([&] {
        require(s, "session");
        const auto data = extract(s, column);
        int64_t need = 0;
        for (const auto& row : data) {
            need += static_cast<int64_t>(row.size());
        }
        check_capacity(need, capacity, len);
        if (need > 0) require(out, "out");
        for (const auto& row : data) {
            out = std::copy(row.begin(), row.end(), out);
        }
    });
}

int32_t transim_state_length(const transim_session* s, int64_t* len) {
    return guarded([&] {
        require(s, "session");
        require(len, "len");
        const auto& c = s->engine.case_data();
        *len = static_cast<int64_t>(3 * c.generators.size() + 2 * c.buses.size());
    });
}

int32_t transim_get_state(const transim_session* s, int64_t k, double* out, int64_t capacity, int64_t* len) {
    return guarded([&] {
        require(s, "session");
        const auto& st = s->engine.simulator().get_state(k);
        const auto need = static_cast<int64_t>(3 * st.delta.size() + 2 * st.v.size());
        check_capacity(need, capacity, len);
        require(out, "out");
        out = std::copy(st.delta.begin(), st.delta.end(), out);
        out = std::copy(st.omega.begin(), st.omega.end(), out);
        out = std::copy(st.e_prime.begin(), st.e_prime.end(), out);
        for (const auto& v : st.v) *out++ = v.real();
        for (const auto& v : st.v) *out++ = v.imag();
    });
}

int32_t transim_set_state(transim_session* s, int64_t k, const double* values, int64_t len) {
    return guarded([&] {
        require(s, "session");
        require(values, "values");
        const auto& c = s->engine.case_data();
        const std::size_t ng = c.generators.size();
        const std::size_t nb = c.buses.size();
        if (len != static_cast<int64_t>(3 * ng + 2 * nb)) {
            throw transim::Error(ErrorCode::DimensionMismatch, "state vector has " + std::to_string(len) +
                                                                   " values, expected " + std::to_string(3 * ng + 2 * nb));
        }
        transim::DynamicState st;
        st.delta.assign(values, values + ng);
        st.omega.assign(values + ng, values + 2 * ng);
        st.e_prime.assign(values + 2 * ng, values + 3 * ng);
        for (std::size_t i = 0; i < nb; ++i) {
            st.v.emplace_back(values[3 * ng + i], values[3 * ng + nb + i]);
        }
        s->engine.set_state(k, st);
    });
}

}  // extern "C"
