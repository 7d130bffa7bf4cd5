void s222(int n, int *a, int *b, int *c, int *e) {
    for (int i = 1; i < n; i++) {
        a[i] += b[i] * c[i];
        e[i] = e[i - 1] + b[i];
        a[i] -= b[i] * c[i];
    }
}
