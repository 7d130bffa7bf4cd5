void s274(int n, int *a, int *b, int *c, int *d, int *e) {
    for (int i = 0; i < n; i++) {
        a[i] = c[i] + e[i] * d[i];
        if (a[i] > 0) {
            b[i] = a[i] + b[i];
        } else {
            a[i] = d[i] * e[i];
        }
    }
}
