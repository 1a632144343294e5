#include <math.h>
#include <stdio.h>
#include <string.h>

#include "relmcl.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        RelmclStatus st_ = (call);                                         \
        if (st_ != RELMCL_STATUS_OK) {                                     \
            char *m_ = relmcl_last_error();                                \
            fprintf(stderr, "%s failed (%d): %s\n", #call, st_, m_ ? m_ : ""); \
            relmcl_string_free(m_);                                        \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    RelmclMap *map = NULL;
    RelmclDecisionModel *dm = NULL;
    RelmclLocalizer *loc = NULL;
    RelmclMapInfo info;
    RelmclEstimate est;

    printf("relmcl %s\n", relmcl_version());
    CHECK(relmcl_map_bundled("corridor_cross", 0.05, &map));
    CHECK(relmcl_map_info(map, &info));
    if (info.width != 400 || info.height != 400) {
        fprintf(stderr, "unexpected map size %zux%zu\n", info.width, info.height);
        return 1;
    }
    CHECK(relmcl_decision_model_train(map, 200, 3, &dm));
    if (!(relmcl_decision_model_threshold(dm) > 0.0)) {
        fprintf(stderr, "bad threshold\n");
        return 1;
    }
    CHECK(relmcl_localizer_new(map, dm, "[filter]\nn_particles = 200\n", 5.0, 10.0, 0.0, 7, &loc));

    /* a corridor 2 m wide seen from its center line, walls only */
    enum { N = 181 };
    double ranges[N];
    RelmclScanInfo scan = {-M_PI / 2, M_PI / (N - 1), 0.05, 30.0};
    for (int k = 0; k < N; k++) {
        double a = scan.angle_min + k * scan.angle_increment;
        double s = fabs(sin(a));
        ranges[k] = s > 1e-3 ? fmin(1.0 / s, 30.0) : 30.0;
    }
    CHECK(relmcl_localizer_step(loc, 0.0, 0.0, 0.1, ranges, N, &scan, &est));
    if (!isfinite(est.x) || est.reliability < 0.0 || est.reliability > 1.0) {
        fprintf(stderr, "bad estimate\n");
        return 1;
    }

    if (relmcl_localizer_step(NULL, 0.0, 0.0, 0.1, ranges, N, &scan, &est) != RELMCL_STATUS_NULL_POINTER) {
        fprintf(stderr, "null handle accepted\n");
        return 1;
    }
    char *msg = relmcl_last_error();
    if (msg == NULL || strstr(msg, "loc") == NULL) {
        fprintf(stderr, "missing error message\n");
        return 1;
    }
    relmcl_string_free(msg);

    relmcl_localizer_free(loc);
    relmcl_decision_model_free(dm);
    relmcl_map_free(map);
    printf("ok %.3f %.3f %.3f %.3f\n", est.x, est.y, est.theta, est.reliability);
    return 0;
}
