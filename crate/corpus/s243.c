void s243(int n, int *a, int *b, int *c, int *d, int *e) {
    for (int i = 0; i < n - 1; i++) {
        a[i] = b[i] + c[i] * d[i];
        b[i] = a[i] + d[i] + e[i];
        a[i] = b[i] + a[i + 1] * d[i];
    }
}
