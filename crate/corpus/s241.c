void s241(int n, int *a, int *b, int *c, int *d) {
    for (int i = 0; i < n - 1; i++) {
        a[i] = b[i] * c[i] * d[i];
        b[i] = a[i] + a[i + 1] * d[i];
    }
}
