void s212(int n, int *a, int *b, int *c, int *d) {
    for (int i = 0; i < n-1; i++) {
        a[i] *= c[i];
        b[i] += a[i + 1] * d[i];
    }
}
