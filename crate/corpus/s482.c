void s482(int n, int *a, int *b, int *c) {
    for (int i = 0; i < n; i++) {
        a[i] += b[i] * c[i];
        if (c[i] > b[i]) {
            break;
        }
    }
}
