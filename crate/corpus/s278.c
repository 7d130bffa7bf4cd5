void s278(int n, int *a, int *b, int *c, int *d, int *e) {
    for (int i = 0; i < n; i++) {
        if (a[i] > 0) {
            goto L20;
        }
        b[i] = -b[i] + d[i] * e[i];
        goto L30;
L20:;
        c[i] = -c[i] + d[i] * e[i];
L30:;
        a[i] = b[i] + c[i] * d[i];
    }
}
