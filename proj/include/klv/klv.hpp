#pragma once

#include "cubature.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "lie.hpp"
#include "operator_calculus.hpp"
#include "path.hpp"
#include "polynomial.hpp"
#include "solver.hpp"
#include "systems.hpp"
#include "tensor.hpp"
#include "tensor_json.hpp"
#include "vector_fields.hpp"
#include "word.hpp"
