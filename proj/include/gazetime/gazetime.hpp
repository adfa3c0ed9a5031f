#pragma once
// Umbrella header: the full offset-time modeling pipeline.
#include "gazetime/apps.hpp"
#include "gazetime/dataset.hpp"
#include "gazetime/errors.hpp"
#include "gazetime/eval.hpp"
#include "gazetime/exgauss.hpp"
#include "gazetime/geometry.hpp"
#include "gazetime/model.hpp"
#include "gazetime/random.hpp"
#include "gazetime/rbf.hpp"
#include "gazetime/trials.hpp"
