void s127(int n, int *a, int *b, int *c, int *d, int *e) {
    int j;
    j = -1;
    for (int i = 0; i < n / 2; i++) {
        j++;
        a[j] = b[i] + c[i] * d[i];
        j++;
        a[j] = b[i] + d[i] * e[i];
    }
}
