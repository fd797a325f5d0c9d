#pragma once

#include "viraal/camera.hpp"
#include "viraal/error.hpp"
#include "viraal/io.hpp"
#include "viraal/manifold.hpp"
#include "viraal/ray.hpp"
#include "viraal/robot.hpp"
#include "viraal/service.hpp"
#include "viraal/session.hpp"
#include "viraal/sim.hpp"
#include "viraal/stats.hpp"
#include "viraal/triangulate.hpp"
