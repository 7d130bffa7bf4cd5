void s161(int n, int *a, int *b, int *c, int *d, int *e) {
    for (int i = 0; i < n - 1; i++) {
        if (b[i] < 0) {
            goto L20;
        }
        a[i] = c[i] + d[i] * e[i];
        goto L10;
L20:;
        c[i + 1] = a[i] + d[i] * d[i];
L10:;
    }
}
