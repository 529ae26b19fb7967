#include <math.h>
#include <stdio.h>
#include <string.h>

#include "cteskf.h"

/* Stationary unit at the equator on the prime meridian, body axes aligned
   with the Earth-fixed axes. */
int main(void) {
    CteskfConfig cfg;
    if (cteskf_config_default(&cfg) != CTESKF_STATUS_OK) return 1;
    cfg.parameterization = CTESKF_PARAMETERIZATION_LEFT_INVARIANT;

    CteskfNavState x0;
    memset(&x0, 0, sizeof x0);
    x0.attitude[0] = x0.attitude[4] = x0.attitude[8] = 1.0;
    x0.pos[0] = 6378137.0;

    double p0[225] = {0};
    for (int i = 0; i < 15; ++i) p0[i * 16] = i < 3 ? 1e-4 : 1e-2;

    CteskfFilter *f = NULL;
    if (cteskf_filter_create(&cfg, &x0, p0, &f) != CTESKF_STATUS_OK) {
        fprintf(stderr, "create: %s\n", cteskf_last_error_message());
        return 2;
    }
    /* specific force balancing gravity plus the centripetal term; Earth rate on the gyro */
    double gyro[3] = {0.0, 0.0, 7.292115e-5};
    double accel[3] = {9.79, 0.0, 0.0};
    double vel[3] = {0.0, 0.0, 0.0};
    double sigma[3] = {0.1, 0.1, 0.1};
    for (int k = 1; k <= 100; ++k) {
        double t = 0.01 * k;
        if (cteskf_filter_propagate(f, t, gyro, accel) != CTESKF_STATUS_OK) return 3;
        if (k % 10 == 0 && cteskf_filter_update_gnss(f, t, vel, sigma) != CTESKF_STATUS_OK) return 4;
    }
    if (cteskf_filter_update_gnss(f, 5.0, vel, sigma) != CTESKF_STATUS_TIMESTAMP_MISMATCH) return 5;
    if (strlen(cteskf_last_error_message()) == 0) return 6;
    if (cteskf_filter_propagate(NULL, 1.0, gyro, accel) != CTESKF_STATUS_NULL_POINTER) return 7;

    CteskfNavState x;
    double p[225];
    if (cteskf_filter_state(f, &x) != CTESKF_STATUS_OK) return 8;
    if (cteskf_filter_covariance(f, CTESKF_PARAMETERIZATION_EKF, p) != CTESKF_STATUS_OK) return 9;
    cteskf_filter_destroy(f);

    if (fabs(x.time - 1.0) > 1e-12 || !(p[0] > 0.0)) return 10;
    printf("cteskf %s ok, pos %.3f %.3f %.3f\n", cteskf_version(), x.pos[0], x.pos[1], x.pos[2]);
    return 0;
}
