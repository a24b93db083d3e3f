#pragma once

#include "dagdiff/bench.hpp"
#include "dagdiff/check.hpp"
#include "dagdiff/equivalence.hpp"
#include "dagdiff/errors.hpp"
#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/parser.hpp"
#include "dagdiff/printer.hpp"
#include "dagdiff/rules.hpp"
#include "dagdiff/symbolic.hpp"
#include "dagdiff/tracer.hpp"
#include "dagdiff/transforms.hpp"
