#pragma once

// Everything except the HTTP judge, which lives in remote_judge.hpp so
// offline users do not need cpp-httplib or libssl.
#include "tracedom/bench.hpp"
#include "tracedom/digest.hpp"
#include "tracedom/dominators.hpp"
#include "tracedom/equivalence.hpp"
#include "tracedom/error.hpp"
#include "tracedom/graph.hpp"
#include "tracedom/image.hpp"
#include "tracedom/judge.hpp"
#include "tracedom/metrics.hpp"
#include "tracedom/model.hpp"
#include "tracedom/synth.hpp"
#include "tracedom/trace.hpp"
#include "tracedom/union_find.hpp"
#include "tracedom/validation.hpp"
